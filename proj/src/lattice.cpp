#include "latgate/lattice.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace latgate {

std::vector<Site> LatticeConfig::occupied_sites() const {
    std::vector<Site> out;
    if (occupancy.empty()) return out;
    for (int i = 0; i < n_sites(); ++i)
        if (occupancy[i]) out.push_back(site_at(i));
    return out;
}

std::vector<std::uint8_t> LatticeConfig::sample_occupancy(Rng& rng) const {
    std::vector<std::uint8_t> occ(n_sites());
    for (auto& o : occ) o = rng.bernoulli(fill_probability) ? 1 : 0;
    return occ;
}

double gaussian_intensity(const BeamSpec& beam, double px_um, double py_um, double pz_um) {
    if (beam.waist_um <= 0.0 || beam.rayleigh_um <= 0.0)
        throw std::domain_error("gaussian_intensity: non-positive beam geometry");
    double along, r_sq;
    if (beam.axis == BeamAxis::X) {
        along = px_um;
        r_sq = py_um * py_um + pz_um * pz_um;
    } else {
        along = py_um;
        r_sq = px_um * px_um + pz_um * pz_um;
    }
    const double wz_sq =
        beam.waist_um * beam.waist_um * (1.0 + (along / beam.rayleigh_um) * (along / beam.rayleigh_um));
    const double axial = beam.waist_um * beam.waist_um / wz_sq;
    return axial * std::exp(-2.0 * r_sq / wz_sq);
}

double gaussian_intensity_at_site(const BeamSpec& beam, const LatticeConfig& lat, const Site& s) {
    return gaussian_intensity(beam, (s.x - beam.focus.x) * lat.spacing_um,
                              (s.y - beam.focus.y) * lat.spacing_um,
                              (s.z - beam.focus.z) * lat.spacing_um);
}

namespace {

// Transverse criterion: exp(-2 r^2 / w(z)^2) >= 0.5 counts as illuminated,
// independent of the Rayleigh falloff along the beam.
bool above_threshold(const BeamSpec& beam, const LatticeConfig& lat, const Site& s) {
    double r_sq, along;
    const double dx = (s.x - beam.focus.x) * lat.spacing_um;
    const double dy = (s.y - beam.focus.y) * lat.spacing_um;
    const double dz = (s.z - beam.focus.z) * lat.spacing_um;
    if (beam.axis == BeamAxis::X) {
        along = dx;
        r_sq = dy * dy + dz * dz;
    } else {
        along = dy;
        r_sq = dx * dx + dz * dz;
    }
    const double wz_sq =
        beam.waist_um * beam.waist_um * (1.0 + (along / beam.rayleigh_um) * (along / beam.rayleigh_um));
    return std::exp(-2.0 * r_sq / wz_sq) >= 0.5;
}

}  // namespace

StageScene classify_stage(const LatticeConfig& lat, std::span<const BeamSpec> registry,
                          std::span<const int> beam_ids, double cross_ratio_k,
                          double leak_floor) {
    if (cross_ratio_k <= 1.0) throw std::domain_error("classify_stage: k must exceed 1");
    if (beam_ids.size() > 32) throw std::domain_error("classify_stage: too many beams");
    for (int id : beam_ids) {
        const BeamSpec& b = registry[id];
        if (!lat.in_bounds(b.focus))
            throw std::domain_error("classify_stage: beam focus outside the lattice");
    }
    StageScene scene;
    scene.beam_ids.assign(beam_ids.begin(), beam_ids.end());
    scene.illum.resize(lat.n_sites());
    const double kNegligible = std::max(leak_floor, 1e-16);
    for (int i = 0; i < lat.n_sites(); ++i) {
        const Site s = lat.site_at(i);
        SiteIllum& il = scene.illum[i];
        int lit = 0;
        for (std::size_t bi = 0; bi < beam_ids.size(); ++bi) {
            const BeamSpec& b = registry[beam_ids[bi]];
            if (!b.enabled) continue;
            const double inten = gaussian_intensity_at_site(b, lat, s);
            if (inten < kNegligible) continue;
            il.beams.emplace_back(static_cast<int>(bi), inten);
            if (above_threshold(b, lat, s)) {
                il.lit_mask |= 1u << bi;
                ++lit;
            }
        }
        il.cls = lit >= 2 ? SiteClass::Cross : (lit == 1 ? SiteClass::Line : SiteClass::Spectator);
        const bool counted = lat.occupancy.empty() || lat.occupancy[i];
        if (counted) {
            if (il.cls == SiteClass::Cross)
                ++scene.n_cross;
            else if (il.cls == SiteClass::Line)
                ++scene.n_line;
            else
                ++scene.n_spectator;
        }
    }
    return scene;
}

double aux_shift_hz(const StageScene& scene, std::span<const BeamSpec> registry, int site_idx,
                    double cross_ratio_k, std::span<const double> beam_factors) {
    const SiteIllum& il = scene.illum[site_idx];
    double lit_sum = 0.0, unlit_sum = 0.0;
    int lit_n = 0;
    for (const auto& [bi, inten] : il.beams) {
        const int id = scene.beam_ids[bi];
        const BeamSpec& b = registry[id];
        const double factor = beam_factors.empty() ? 1.0 : beam_factors[id];
        const double shift = b.peak_shift_hz * b.power_scale * factor * inten;
        if (il.lit_mask & (1u << bi)) {
            lit_sum += shift;
            ++lit_n;
        } else {
            unlit_sum += shift;
        }
    }
    if (lit_n >= 2) return cross_ratio_k * (lit_sum / lit_n) + unlit_sum;
    return lit_sum + unlit_sum;
}

std::vector<double> calibrate_target_intensity(const LatticeConfig& lat,
                                               std::span<const BeamSpec> registry,
                                               std::span<const int> beam_ids, const Site& target) {
    std::vector<double> scales;
    int reaching = 0;
    for (int id : beam_ids) {
        const BeamSpec& b = registry[id];
        const double inten = gaussian_intensity_at_site(b, lat, target);
        if (above_threshold(b, lat, target)) {
            ++reaching;
            const double scale = 1.0 / inten;
            if (scale > 2.0)
                throw std::runtime_error("calibrate_target_intensity: correction above 2x");
            scales.push_back(scale);
        } else {
            scales.push_back(1.0);
        }
    }
    if (reaching < 2)
        throw std::runtime_error("calibrate_target_intensity: target not reachable by two beams");
    return scales;
}

Pattern load_pattern(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_pattern: cannot open " + path);
    Pattern p;
    bool have_dims = false;
    std::vector<Site> occupied;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "dims") {
            if (!(ls >> p.lattice.nx >> p.lattice.ny >> p.lattice.nz))
                throw std::runtime_error("load_pattern: bad dims at line " + std::to_string(lineno));
            have_dims = true;
        } else if (word == "occupied" || word == "target") {
            Site s;
            if (!(ls >> s.x >> s.y >> s.z))
                throw std::runtime_error("load_pattern: bad site at line " + std::to_string(lineno));
            occupied.push_back(s);
            if (word == "target") p.targets.push_back(s);
        } else {
            throw std::runtime_error("load_pattern: unknown keyword '" + word + "' at line " +
                                     std::to_string(lineno));
        }
    }
    if (!have_dims) throw std::runtime_error("load_pattern: missing dims line");
    p.lattice.occupancy.assign(p.lattice.n_sites(), 0);
    for (const Site& s : occupied) {
        if (!p.lattice.in_bounds(s)) throw std::runtime_error("load_pattern: site out of bounds");
        p.lattice.occupancy[p.lattice.index(s)] = 1;
    }
    return p;
}

void save_pattern(const Pattern& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_pattern: cannot open " + path);
    out << "dims " << p.lattice.nx << " " << p.lattice.ny << " " << p.lattice.nz << "\n";
    std::vector<std::uint8_t> is_target(p.lattice.n_sites(), 0);
    for (const Site& s : p.targets) is_target[p.lattice.index(s)] = 1;
    for (int i = 0; i < p.lattice.n_sites(); ++i) {
        if (p.lattice.occupancy.empty() || !p.lattice.occupancy[i]) continue;
        const Site s = p.lattice.site_at(i);
        out << (is_target[i] ? "target " : "occupied ") << s.x << " " << s.y << " " << s.z << "\n";
    }
}

}  // namespace latgate
