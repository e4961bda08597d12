#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "latgate/analysis.hpp"
#include "latgate/compiler.hpp"
#include "latgate/simulator.hpp"

namespace latgate {

// Shared experiment environment: lattice (occupancy resampled per shot when
// not explicit), compiler settings, noise, seeding and worker count.
struct ExperimentSetup {
    LatticeConfig lattice;
    CompilerConfig compiler;
    NoiseConfig noise;
    std::uint64_t seed = 1;
    int workers = 1;
};

// Class labels used in record CSVs: 0 target, 1 line, 2 spectator.
enum : int { kClsTarget = 0, kClsLine = 1, kClsSpectator = 2 };

// Union class of every lattice site over the sequence's stage scenes.
std::vector<int> union_site_classes(const SceneSet& scenes, const LatticeConfig& lat,
                                    const std::vector<Site>& targets);

// ---- phase curve ----------------------------------------------------------

struct PhaseCurvePoint {
    double delta_hz;
    double phase_rad;
};
struct PhaseCurveResult {
    std::vector<PhaseCurvePoint> points;
    double extremum_delta_hz = 0.0;    // branch (f, kf)
    double second_extremum_hz = 0.0;   // branch (0, f)
    double omega = 0.0;
};
PhaseCurveResult run_phase_curve(const ExperimentSetup& s, int points_per_branch = 120);

// ---- spectrum ---------------------------------------------------------------

struct SpectrumResult {
    std::vector<SpectrumRecord> records;  // per (detuning, class) mean transfer
};
SpectrumResult run_spectrum(const ExperimentSetup& s, double probe_omega_rms,
                            std::vector<double> detuning_grid_hz, int shots);

// ---- fringe -----------------------------------------------------------------

struct FringeResult {
    std::vector<FringeRecord> records;  // per (alpha, class)
    std::vector<Site> targets;
    double mean_targets_per_shot = 0.0;
};
FringeResult run_fringe(const ExperimentSetup& s, double theta, std::vector<Site> targets,
                        std::vector<double> alpha_grid, int shots);

// Draw n distinct target sites from the lattice.
std::vector<Site> draw_target_sites(const LatticeConfig& lat, int n, std::uint64_t seed);

// Order targets into gate pairs, avoiding same-plane shared-line pairs.
std::vector<std::vector<Site>> pair_up_targets(const std::vector<Site>& targets);

// ---- randomized benchmarking ------------------------------------------------

struct RBConfig {
    std::vector<int> lengths = {1, 2, 4, 6, 8, 12, 16, 24, 32};
    int cg_randomizations = 3;
    int pg_randomizations_target = 3;
    int pg_randomizations_nontarget = 4;
    int shots_per_point = 100;
    // Synthetic channel: replaces the physics with an Eq.-3 generator.
    bool synthetic = false;
    double synthetic_e2 = 0.0;
    double synthetic_d_if = 0.0;
};

struct RBResult {
    std::vector<RBRecord> records;  // per (length, class)
};
RBResult run_rb(const ExperimentSetup& s, const RBConfig& cfg, std::array<Site, 2> targets);

// ---- robustness ---------------------------------------------------------------

struct RobustnessPoint {
    double frac_shift;
    double f2;
    double sigma;
};
struct RobustnessResult {
    std::vector<RobustnessPoint> points;
};
RobustnessResult run_robustness(const ExperimentSetup& s, std::vector<Site> targets,
                                std::vector<double> frac_shift_grid, int shots);

// ---- pattern -------------------------------------------------------------------

struct PatternSiteCount {
    Site site;
    bool targeted = false;
    int present = 0;
    int bright = 0;
};
struct PatternResult {
    std::vector<PatternSiteCount> sites;  // occupied-pattern sites
};
PatternResult run_pattern(const ExperimentSetup& s, const Pattern& pattern, double theta,
                          int shots);

// ---- echo stress ----------------------------------------------------------------

enum class EchoScheme { Cycled, Naive, XY };

struct EchoStressPoint {
    double rabi_error;
    double contrast;
};
struct EchoStressResult {
    std::vector<EchoStressPoint> points;
};
EchoStressResult run_echo_stress(const ExperimentSetup& s, int n_pulses,
                                 std::vector<double> rabi_error_grid, EchoScheme scheme,
                                 double tau_s, int alpha_points, int shots);

// ---- CSV emission -----------------------------------------------------------------

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);
std::string csv_to_string(const std::string& header,
                          const std::vector<std::vector<double>>& rows);

}  // namespace latgate
