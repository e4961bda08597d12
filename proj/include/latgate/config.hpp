#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "latgate/experiments.hpp"

namespace latgate {

// Key/value config file with [section] blocks, numbers, strings, booleans
// and flat numeric arrays.  Unknown keys are rejected.
struct ConfigValue {
    std::variant<double, bool, std::string, std::vector<double>> v;
    double num() const { return std::get<double>(v); }
    bool boolean() const { return std::get<bool>(v); }
    const std::string& str() const { return std::get<std::string>(v); }
    const std::vector<double>& array() const { return std::get<std::vector<double>>(v); }
};

using ConfigMap = std::map<std::string, ConfigValue>;  // "section.key" -> value

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

struct RunConfig {
    // run
    std::string experiment = "phase-curve";
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "out";
    // lattice
    LatticeConfig lattice;
    std::string occupancy_file;
    // gate/compiler
    CompilerConfig compiler;
    // noise
    NoiseConfig noise;
    // experiment block
    int shots = 100;
    double theta = 0.5 * kPi;
    int n_targets = 48;
    int alpha_points = 12;
    RBConfig rb;
    std::vector<double> target_sites_flat;
    std::vector<double> frac_shift_grid = {-0.04, -0.03, -0.02, -0.01, -0.005, 0.0,
                                           0.005, 0.01,  0.02,  0.03,  0.04};
    double detuning_min_khz = -8.0;
    double detuning_max_khz = 110.0;
    int detuning_points = 60;
    double probe_omega_khz = 0.0;  // 0 = use the pi/2 gate Rabi
    int n_pulses = 100;
    std::vector<double> rabi_error_grid = {0.0, 1e-3, 3e-3, 1e-2};
    std::string scheme = "cycled";
    double tau_us = 200.0;
    std::string pattern_file;
    int points_per_branch = 120;
    // budget: measured per-gate errors in 1e-4 units (NaN = absent)
    double measured_e_spectator_1e4 = std::numeric_limits<double>::quiet_NaN();
    double measured_e_line_1e4 = std::numeric_limits<double>::quiet_NaN();
    double measured_e_target_1e4 = std::numeric_limits<double>::quiet_NaN();

    ExperimentSetup setup() const;
    std::vector<Site> resolve_targets() const;

    // Build from config text (empty => defaults) plus key=value overrides.
    static RunConfig load(const std::string& config_text,
                          const std::vector<std::string>& overrides);
    static RunConfig from_map(const ConfigMap& map);
    std::string to_manifest_json(const std::string& config_hash,
                                 const std::vector<std::string>& outputs) const;
    static RunConfig from_manifest_file(const std::string& path);
};

std::uint64_t content_hash(const std::string& text);

}  // namespace latgate
