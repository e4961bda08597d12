#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latgate/rng.hpp"

namespace latgate {

struct Site {
    int x = 0, y = 0, z = 0;
    bool operator==(const Site&) const = default;
};

struct LatticeConfig {
    int nx = 5, ny = 5, nz = 5;
    double spacing_um = 5.0;
    double fill_probability = 0.40;
    // Explicit occupancy (size nx*ny*nz) or empty => sample per shot.
    std::vector<std::uint8_t> occupancy;

    int n_sites() const { return nx * ny * nz; }
    int index(const Site& s) const { return (s.z * ny + s.y) * nx + s.x; }
    Site site_at(int idx) const {
        return {idx % nx, (idx / nx) % ny, idx / (nx * ny)};
    }
    bool in_bounds(const Site& s) const {
        return s.x >= 0 && s.x < nx && s.y >= 0 && s.y < ny && s.z >= 0 && s.z < nz;
    }
    std::vector<Site> occupied_sites() const;
    std::vector<std::uint8_t> sample_occupancy(Rng& rng) const;
};

enum class BeamAxis { X, Y };

struct BeamSpec {
    BeamAxis axis = BeamAxis::X;
    Site focus;                  // focus site; the beam runs along `axis` in plane focus.z
    double waist_um = 2.7;
    double rayleigh_um = 26.0;
    double peak_shift_hz = 51.2e3;  // ac Stark shift f imparted at focus
    double power_scale = 1.0;       // target-specific intensity correction
    bool enabled = true;
};

// Relative intensity of an ideal Gaussian beam at a lattice point (um
// coordinates): (w0/w(z))^2 exp(-2 r^2 / w(z)^2), 1 at focus.
double gaussian_intensity(const BeamSpec& beam, double px_um, double py_um, double pz_um);
double gaussian_intensity_at_site(const BeamSpec& beam, const LatticeConfig& lat, const Site& s);

enum class SiteClass : std::uint8_t { Cross, Line, Spectator };

struct SiteIllum {
    SiteClass cls = SiteClass::Spectator;
    // (beam index, relative intensity) for every enabled beam with
    // non-negligible intensity at the site; lit_mask marks beams above the
    // transverse 50% threshold.
    std::vector<std::pair<int, double>> beams;
    std::uint32_t lit_mask = 0;
};

struct StageScene {
    std::vector<int> beam_ids;       // into the global beam registry
    std::vector<SiteIllum> illum;    // per lattice site (all sites, occupied or not)
    int n_cross = 0, n_line = 0, n_spectator = 0;  // occupied-site counts

    SiteClass class_of(int site_idx) const { return illum[site_idx].cls; }
};

// Classify every site of the lattice against the given beams (indices into
// `registry`).  Counts are over occupied sites when the lattice carries an
// occupancy, else over all sites.  Relative intensities below `leak_floor`
// are dropped from the illumination record (and hence from aux shifts);
// pass 0 to retain every neighbor-beam leak.
StageScene classify_stage(const LatticeConfig& lat, std::span<const BeamSpec> registry,
                          std::span<const int> beam_ids, double cross_ratio_k,
                          double leak_floor = 1e-2);

// Aux-level shift (Hz) of one site in a scene. beam_factors scale each
// registry beam's shift (power calibration x noise); pass {} for nominal.
double aux_shift_hz(const StageScene& scene, std::span<const BeamSpec> registry, int site_idx,
                    double cross_ratio_k, std::span<const double> beam_factors = {});

// Power scale factors bringing the cross shift at `target` back to
// k * f_nominal despite focus offset / Rayleigh falloff.  Throws if a scale
// above 2 would be needed.
std::vector<double> calibrate_target_intensity(const LatticeConfig& lat,
                                               std::span<const BeamSpec> registry,
                                               std::span<const int> beam_ids, const Site& target);

// Occupancy / target pattern file: '#' comments; `dims nx ny nz`;
// `occupied x y z`; `target x y z` (target implies occupied). 0-based.
struct Pattern {
    LatticeConfig lattice;
    std::vector<Site> targets;
};
Pattern load_pattern(const std::string& path);
void save_pattern(const Pattern& p, const std::string& path);

}  // namespace latgate
