#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "latgate/lattice.hpp"

using namespace latgate;

namespace {

BeamSpec beam_at(BeamAxis axis, Site focus) {
    BeamSpec b;
    b.axis = axis;
    b.focus = focus;
    return b;
}

}  // namespace

TEST_CASE("gaussian intensity: focus, neighbor crosstalk, Rayleigh falloff") {
    const BeamSpec b = beam_at(BeamAxis::X, {2, 2, 2});
    CHECK(gaussian_intensity(b, 0, 0, 0) == doctest::Approx(1.0));
    // Nearest transverse neighbor at 5 um.
    const double r5 = gaussian_intensity(b, 0, 5.0, 0);
    CHECK(r5 == doctest::Approx(std::exp(-2.0 * (5.0 / 2.7) * (5.0 / 2.7))).epsilon(1e-12));
    CHECK(r5 == doctest::Approx(1.05e-3).epsilon(0.02));
    // One Rayleigh range along the axis halves the on-axis intensity.
    CHECK(gaussian_intensity(b, 26.0, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    BeamSpec bad = b;
    bad.waist_um = -1.0;
    CHECK_THROWS_AS(gaussian_intensity(bad, 0, 0, 0), std::domain_error);
}

TEST_CASE("classification counts on the full lattice") {
    LatticeConfig lat;  // occupancy empty => counts over all sites
    std::vector<BeamSpec> beams;
    const Site a{1, 2, 1}, b{3, 1, 3};
    beams.push_back(beam_at(BeamAxis::X, a));
    beams.push_back(beam_at(BeamAxis::Y, a));
    beams.push_back(beam_at(BeamAxis::X, b));
    beams.push_back(beam_at(BeamAxis::Y, b));

    SUBCASE("two targets in distinct planes, all four beams") {
        const std::vector<int> ids = {0, 1, 2, 3};
        const StageScene scene = classify_stage(lat, beams, ids, 1.8);
        CHECK(scene.n_cross == 2);
        CHECK(scene.n_line == 16);
        CHECK(scene.n_spectator == 107);
    }
    SUBCASE("one target's cross stage") {
        const std::vector<int> ids = {0, 1};
        const StageScene scene = classify_stage(lat, beams, ids, 1.8);
        CHECK(scene.n_cross == 1);
        CHECK(scene.n_line == 8);
        CHECK(scene.n_spectator == 116);
        // Line count identity on a full lattice.
        CHECK(scene.n_line == (lat.nx - 1) + (lat.ny - 1));
    }
    SUBCASE("empty lattice") {
        LatticeConfig empty = lat;
        empty.occupancy.assign(empty.n_sites(), 0);
        const StageScene scene = classify_stage(empty, beams, std::vector<int>{0, 1}, 1.8);
        CHECK(scene.n_cross == 0);
        CHECK(scene.n_line == 0);
        CHECK(scene.n_spectator == 0);
    }
    SUBCASE("k must exceed 1") {
        CHECK_THROWS_AS(classify_stage(lat, beams, std::vector<int>{0, 1}, 0.9),
                        std::domain_error);
    }
}

TEST_CASE("class partition covers every occupied site exactly once") {
    LatticeConfig lat;
    Rng rng(3);
    lat.occupancy = lat.sample_occupancy(rng);
    std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {2, 3, 0}), beam_at(BeamAxis::Y, {2, 3, 0}),
                                   beam_at(BeamAxis::X, {4, 0, 2}),
                                   beam_at(BeamAxis::Y, {4, 0, 2})};
    const StageScene scene = classify_stage(lat, beams, std::vector<int>{0, 1, 2, 3}, 1.8);
    int occupied = 0;
    for (int i = 0; i < lat.n_sites(); ++i)
        if (lat.occupancy[i]) ++occupied;
    CHECK(scene.n_cross + scene.n_line + scene.n_spectator == occupied);
}

TEST_CASE("aux shifts: spectator zero, line f, cross 1.8 f, strict ordering") {
    LatticeConfig lat;
    std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {2, 2, 2}),
                                   beam_at(BeamAxis::Y, {2, 2, 2})};
    const std::vector<int> ids = {0, 1};
    const StageScene scene = classify_stage(lat, beams, ids, 1.8);
    const double f = beams[0].peak_shift_hz;
    // Cross at the intersection of two focused beams.
    CHECK(aux_shift_hz(scene, beams, lat.index({2, 2, 2}), 1.8) == doctest::Approx(1.8 * f));
    // Line atom two sites along the x beam: pure Rayleigh falloff.
    CHECK(aux_shift_hz(scene, beams, lat.index({0, 2, 2}), 1.8) ==
          doctest::Approx(f / (1.0 + std::pow(2.0 * 5.0 / 26.0, 2))).epsilon(1e-12));
    // Far spectator: zero.
    CHECK(aux_shift_hz(scene, beams, lat.index({0, 0, 0}), 1.8) == doctest::Approx(0.0));
    // Monotonicity: spectator < line < cross over all sites.
    double max_spec = 0.0, min_line = 1e300, max_line = 0.0, min_cross = 1e300;
    for (int i = 0; i < lat.n_sites(); ++i) {
        const double s = aux_shift_hz(scene, beams, i, 1.8);
        switch (scene.class_of(i)) {
            case SiteClass::Spectator: max_spec = std::max(max_spec, s); break;
            case SiteClass::Line:
                min_line = std::min(min_line, s);
                max_line = std::max(max_line, s);
                break;
            case SiteClass::Cross: min_cross = std::min(min_cross, s); break;
        }
    }
    CHECK(max_spec < min_line);
    CHECK(max_line < min_cross);
}

TEST_CASE("sub-threshold neighbor leak is retained when the floor is disabled") {
    LatticeConfig lat;
    std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {2, 2, 2}),
                                   beam_at(BeamAxis::Y, {2, 2, 2})};
    const StageScene scene = classify_stage(lat, beams, std::vector<int>{0, 1}, 1.8, 0.0);
    // Neighbor of the x line: spectator class but a ~1e-3 f shift.
    const int site = lat.index({0, 3, 2});
    CHECK(scene.class_of(site) == SiteClass::Spectator);
    const double s = aux_shift_hz(scene, beams, site, 1.8);
    CHECK(s > 1e-4 * beams[0].peak_shift_hz);
    CHECK(s < 4e-3 * beams[0].peak_shift_hz);
}

TEST_CASE("beam power factors scale the shifts") {
    LatticeConfig lat;
    std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {2, 2, 2}),
                                   beam_at(BeamAxis::Y, {2, 2, 2})};
    const StageScene scene = classify_stage(lat, beams, std::vector<int>{0, 1}, 1.8);
    const std::vector<double> factors = {1.1, 0.9};
    const double f = beams[0].peak_shift_hz;
    CHECK(aux_shift_hz(scene, beams, lat.index({2, 2, 2}), 1.8, factors) ==
          doctest::Approx(1.8 * f * (1.1 + 0.9) / 2.0));
}

TEST_CASE("target intensity calibration") {
    LatticeConfig lat;
    lat.nx = 13;
    lat.ny = 13;
    lat.nz = 13;
    lat.spacing_um = 13.0;
    const Site target{6, 6, 6};
    const std::vector<int> ids = {0, 1};
    // Both foci on the target: unity scales.
    {
        std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, target),
                                       beam_at(BeamAxis::Y, target)};
        const auto scales = calibrate_target_intensity(lat, beams, ids, target);
        CHECK(scales[0] == doctest::Approx(1.0));
        CHECK(scales[1] == doctest::Approx(1.0));
    }
    // The x beam's focus displaced one Rayleigh range (26 um = 2 sites)
    // along its own axis: that beam needs twice the power at the target.
    {
        std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {4, 6, 6}),
                                       beam_at(BeamAxis::Y, target)};
        const auto scales = calibrate_target_intensity(lat, beams, ids, target);
        CHECK(scales[0] == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(scales[1] == doctest::Approx(1.0));
    }
    // Half a Rayleigh range: 1/(1/(1+(13/26)^2)) = 1.25.
    {
        std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {5, 6, 6}),
                                       beam_at(BeamAxis::Y, target)};
        const auto scales = calibrate_target_intensity(lat, beams, ids, target);
        CHECK(scales[0] == doctest::Approx(1.25).epsilon(1e-9));
    }
    // Beyond one Rayleigh range the correction would exceed 2x.
    {
        std::vector<BeamSpec> beams = {beam_at(BeamAxis::X, {3, 6, 6}),
                                       beam_at(BeamAxis::Y, target)};
        CHECK_THROWS_AS(calibrate_target_intensity(lat, beams, ids, target), std::runtime_error);
    }
}

TEST_CASE("occupancy sampling statistics at 40% fill") {
    LatticeConfig lat;
    double total = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        Rng rng(77, 0x0CC, r);
        const auto occ = lat.sample_occupancy(rng);
        for (auto o : occ) total += o;
    }
    const double mean = total / reps;
    // Binomial(125, 0.4): mean 50; 400 reps give an SE of ~0.27.
    CHECK(mean == doctest::Approx(50.0).epsilon(0.03));
}

TEST_CASE("pattern file round trip and error paths") {
    namespace fs = std::filesystem;
    Pattern p;
    p.lattice.occupancy.assign(125, 0);
    p.lattice.occupancy[p.lattice.index({1, 2, 3})] = 1;
    p.lattice.occupancy[p.lattice.index({0, 0, 0})] = 1;
    p.targets.push_back({1, 2, 3});
    const std::string path = (fs::temp_directory_path() / "latgate_pattern_test.txt").string();
    save_pattern(p, path);
    const Pattern q = load_pattern(path);
    CHECK(q.lattice.occupancy == p.lattice.occupancy);
    REQUIRE(q.targets.size() == 1);
    CHECK(q.targets[0] == Site{1, 2, 3});
    fs::remove(path);
    CHECK_THROWS(load_pattern("/nonexistent/file.txt"));
}
