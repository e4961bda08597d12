#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "latgate/noise.hpp"

using namespace latgate;

TEST_CASE("sample_shot: all-zero sigmas give the identity realization") {
    const NoiseConfig off = NoiseConfig::all_off();
    const ShotRealization r = sample_shot(off, 10, 4, 42, 3);
    CHECK(r.amplitude_factor == 1.0);
    for (double d : r.atom_detuning_hz) CHECK(d == 0.0);
    for (double b : r.beam_f_factor) CHECK(b == 1.0);
}

TEST_CASE("sample_shot: determinism and CLT mean") {
    NoiseConfig cfg;
    const ShotRealization a = sample_shot(cfg, 5, 2, 9, 17);
    const ShotRealization b = sample_shot(cfg, 5, 2, 9, 17);
    CHECK(a.amplitude_factor == b.amplitude_factor);
    CHECK(a.atom_detuning_hz == b.atom_detuning_hz);
    CHECK(a.beam_f_factor == b.beam_f_factor);
    // Different shot index changes the draw.
    const ShotRealization c = sample_shot(cfg, 5, 2, 9, 18);
    CHECK(a.amplitude_factor != c.amplitude_factor);

    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += sample_shot(cfg, 0, 0, 1234, i).amplitude_factor;
    const double mean = acc / n;
    // sigma 3e-3 over 1e5 draws: SE ~ 1e-5.
    CHECK(std::abs(mean - 1.0) < 5e-5);
}

TEST_CASE("scattering probability: rate times shift times exposure") {
    NoiseConfig cfg;
    CHECK(scattering_probability(0.0, 1.0, cfg) == 0.0);
    // Line atom at f = 51.2 kHz, illuminated for 2 x 252 us per gate.
    const double p = scattering_probability(51.2, 2 * 252e-6, cfg);
    CHECK(p == doctest::Approx(8.0e-4).epsilon(0.01));
    // Target exposure: cross stage at 1.8 f plus two line stages.
    const double pt = scattering_probability((1.8 + 2.0) * 51.2, 252e-6, cfg);
    CHECK(pt == doctest::Approx(16e-4).epsilon(0.25));
    CHECK(scattering_probability(1e12, 1.0, cfg) == 1.0);  // clipped
}

TEST_CASE("t2 decay factor") {
    NoiseConfig cfg;
    CHECK(t2_decay_factor(0.0, cfg) == 1.0);
    CHECK(t2_decay_factor(7.0, cfg) == doctest::Approx(std::exp(-1.0)));
    CHECK(1.0 - t2_decay_factor(800e-6, cfg) == doctest::Approx(1.14e-4).epsilon(0.01));
    CHECK_THROWS_AS(t2_decay_factor(-1.0, cfg), std::domain_error);
    cfg.t2_prime_s = 0.0;
    CHECK(t2_decay_factor(5.0, cfg) == 1.0);
}

TEST_CASE("apply_spam: fringe bounds") {
    NoiseConfig cfg;
    Rng rng(2024);
    const int n = 200000;
    std::vector<double> ones(n, 1.0), zeros(n, 0.0);
    const MeasuredCounts top = apply_spam(ones, cfg, rng);
    const MeasuredCounts bot = apply_spam(zeros, cfg, rng);
    // (1 - 0.03)(1 - 0.02) ~ 0.95 and the clearing leak ~ 0.005.
    CHECK(top.fraction() == doctest::Approx(0.9506).epsilon(0.005));
    CHECK(bot.fraction() == doctest::Approx(0.00475).epsilon(0.1));

    const NoiseConfig off = NoiseConfig::all_off();
    Rng rng2(1);
    CHECK(apply_spam(ones, off, rng2).fraction() == 1.0);
}

TEST_CASE("measure_bright: decohered atoms read 50/50, lost atoms read dark") {
    NoiseConfig off = NoiseConfig::all_off();
    Rng rng(7);
    AtomState s = AtomState::one_state();
    s.decohered = true;
    int bright = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) bright += measure_bright(s, off, rng);
    CHECK(static_cast<double>(bright) / n == doctest::Approx(0.5).epsilon(0.02));
    s.decohered = false;
    s.lost = true;
    for (int i = 0; i < 100; ++i) CHECK(!measure_bright(s, off, rng));
}

TEST_CASE("measure_bright: leaked population reads bright half the time") {
    NoiseConfig off = NoiseConfig::all_off();
    Rng rng(8);
    AtomState s;
    s.aux = 1.0;
    int bright = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) bright += measure_bright(s, off, rng);
    CHECK(static_cast<double>(bright) / n == doctest::Approx(0.5).epsilon(0.02));
}
