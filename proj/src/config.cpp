#include "latgate/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace latgate {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

ConfigValue parse_value(const std::string& raw, int lineno) {
    const std::string t = trim(raw);
    if (t.empty()) throw std::runtime_error("config: empty value at line " + std::to_string(lineno));
    if (t == "true") return {true};
    if (t == "false") return {false};
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw std::runtime_error("config: unterminated string at line " + std::to_string(lineno));
        return {t.substr(1, t.size() - 2)};
    }
    if (t.front() == '[') {
        if (t.back() != ']')
            throw std::runtime_error("config: unterminated array at line " + std::to_string(lineno));
        std::vector<double> xs;
        std::string body = t.substr(1, t.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            std::size_t used = 0;
            xs.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::runtime_error("config: bad array item at line " + std::to_string(lineno));
        }
        return {xs};
    }
    std::size_t used = 0;
    const double d = std::stod(t, &used);
    if (used != t.size())
        throw std::runtime_error("config: bad number '" + t + "' at line " + std::to_string(lineno));
    return {d};
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: bad section at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " +
                                     std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        if (key.empty() || section.empty())
            throw std::runtime_error("config: key outside a section at line " +
                                     std::to_string(lineno));
        map[section + "." + key] = parse_value(line.substr(eq + 1), lineno);
    }
    return map;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::uint64_t content_hash(const std::string& text) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunConfig RunConfig::from_map(const ConfigMap& map) {
    RunConfig rc;
    std::map<std::string, std::function<void(const ConfigValue&)>> schema;
    auto reg_num = [&](const std::string& k, auto setter) {
        schema[k] = [setter](const ConfigValue& v) { setter(v.num()); };
    };
    auto reg_str = [&](const std::string& k, std::string* slot) {
        schema[k] = [slot](const ConfigValue& v) { *slot = v.str(); };
    };
    auto reg_bool = [&](const std::string& k, bool* slot) {
        schema[k] = [slot](const ConfigValue& v) { *slot = v.boolean(); };
    };
    auto reg_arr = [&](const std::string& k, std::vector<double>* slot) {
        schema[k] = [slot](const ConfigValue& v) { *slot = v.array(); };
    };

    reg_str("run.experiment", &rc.experiment);
    reg_num("run.seed", [&rc](double v) { rc.seed = static_cast<std::uint64_t>(v); });
    reg_num("run.workers", [&rc](double v) { rc.workers = static_cast<int>(v); });
    reg_str("run.out_dir", &rc.out_dir);

    reg_num("lattice.nx", [&rc](double v) { rc.lattice.nx = static_cast<int>(v); });
    reg_num("lattice.ny", [&rc](double v) { rc.lattice.ny = static_cast<int>(v); });
    reg_num("lattice.nz", [&rc](double v) { rc.lattice.nz = static_cast<int>(v); });
    reg_num("lattice.spacing_um", [&rc](double v) { rc.lattice.spacing_um = v; });
    reg_num("lattice.fill_probability", [&rc](double v) { rc.lattice.fill_probability = v; });
    reg_str("lattice.occupancy_file", &rc.occupancy_file);

    reg_num("gate.f_khz", [&rc](double v) { rc.compiler.f_hz = v * 1e3; });
    reg_num("gate.cross_ratio_k", [&rc](double v) { rc.compiler.k = v; });
    reg_num("gate.delta_khz", [&rc](double v) { rc.compiler.delta_hz = v * 1e3; });
    reg_num("gate.omega_max_khz", [&rc](double v) { rc.compiler.omega_max = kTwoPi * v * 1e3; });
    reg_num("gate.transfer_budget", [&rc](double v) { rc.compiler.transfer_budget = v; });
    reg_num("gate.t_addr_us", [&rc](double v) { rc.compiler.timing.t_addr = v * 1e-6; });
    reg_num("gate.t_pi_us", [&rc](double v) { rc.compiler.timing.t_pi = v * 1e-6; });
    reg_num("gate.t_half_us", [&rc](double v) { rc.compiler.timing.t_half = v * 1e-6; });
    reg_num("gate.t_ramp_us", [&rc](double v) { rc.compiler.timing.t_ramp = v * 1e-6; });
    reg_num("gate.t_settle_us", [&rc](double v) { rc.compiler.timing.t_settle = v * 1e-6; });
    reg_num("gate.t_tail_us", [&rc](double v) { rc.compiler.timing.t_tail = v * 1e-6; });
    reg_num("gate.integrator_tol", [&rc](double v) { rc.compiler.integ.tol = v; });
    schema["gate.dummy_swap"] = [&rc](const ConfigValue& v) { rc.compiler.dummy_swap = v.boolean(); };

    reg_num("beams.waist_um", [&rc](double v) { rc.compiler.waist_um = v; });
    reg_num("beams.rayleigh_um", [&rc](double v) { rc.compiler.rayleigh_um = v; });

    reg_num("noise.amplitude_jitter_sigma",
            [&rc](double v) { rc.noise.amplitude_jitter_sigma = v; });
    reg_num("noise.inhom_broadening_hz", [&rc](double v) { rc.noise.inhom_broadening_hz = v; });
    reg_num("noise.f_spread_sigma", [&rc](double v) { rc.noise.f_spread_sigma = v; });
    reg_num("noise.scattering_coeff", [&rc](double v) { rc.noise.scattering_coeff = v; });
    reg_num("noise.t2_prime_s", [&rc](double v) { rc.noise.t2_prime_s = v; });
    reg_num("noise.spam_loss_collision", [&rc](double v) { rc.noise.spam_loss_collision = v; });
    reg_num("noise.spam_transfer_error", [&rc](double v) { rc.noise.spam_transfer_error = v; });
    reg_num("noise.spam_clearing_error", [&rc](double v) { rc.noise.spam_clearing_error = v; });
    reg_bool("noise.coherent_aux_leak", &rc.noise.coherent_aux_leak);

    reg_num("experiment.shots", [&rc](double v) { rc.shots = static_cast<int>(v); });
    reg_num("experiment.theta", [&rc](double v) { rc.theta = v; });
    reg_num("experiment.n_targets", [&rc](double v) { rc.n_targets = static_cast<int>(v); });
    reg_num("experiment.alpha_points", [&rc](double v) { rc.alpha_points = static_cast<int>(v); });
    schema["experiment.lengths"] = [&rc](const ConfigValue& v) {
        rc.rb.lengths.clear();
        for (double d : v.array()) rc.rb.lengths.push_back(static_cast<int>(d));
    };
    reg_num("experiment.cg_randomizations",
            [&rc](double v) { rc.rb.cg_randomizations = static_cast<int>(v); });
    reg_num("experiment.pg_randomizations_target",
            [&rc](double v) { rc.rb.pg_randomizations_target = static_cast<int>(v); });
    reg_num("experiment.pg_randomizations_nontarget",
            [&rc](double v) { rc.rb.pg_randomizations_nontarget = static_cast<int>(v); });
    reg_num("experiment.shots_per_point",
            [&rc](double v) { rc.rb.shots_per_point = static_cast<int>(v); });
    reg_bool("experiment.synthetic", &rc.rb.synthetic);
    reg_num("experiment.synthetic_e2", [&rc](double v) { rc.rb.synthetic_e2 = v; });
    reg_num("experiment.synthetic_d_if", [&rc](double v) { rc.rb.synthetic_d_if = v; });
    reg_arr("experiment.target_sites", &rc.target_sites_flat);
    reg_arr("experiment.frac_shift_grid", &rc.frac_shift_grid);
    reg_num("experiment.detuning_min_khz", [&rc](double v) { rc.detuning_min_khz = v; });
    reg_num("experiment.detuning_max_khz", [&rc](double v) { rc.detuning_max_khz = v; });
    reg_num("experiment.detuning_points",
            [&rc](double v) { rc.detuning_points = static_cast<int>(v); });
    reg_num("experiment.probe_omega_khz", [&rc](double v) { rc.probe_omega_khz = v; });
    reg_num("experiment.n_pulses", [&rc](double v) { rc.n_pulses = static_cast<int>(v); });
    reg_arr("experiment.rabi_error_grid", &rc.rabi_error_grid);
    reg_str("experiment.scheme", &rc.scheme);
    reg_num("experiment.tau_us", [&rc](double v) { rc.tau_us = v; });
    reg_str("experiment.pattern_file", &rc.pattern_file);
    reg_num("experiment.points_per_branch",
            [&rc](double v) { rc.points_per_branch = static_cast<int>(v); });
    reg_num("experiment.measured_e_spectator_1e4",
            [&rc](double v) { rc.measured_e_spectator_1e4 = v; });
    reg_num("experiment.measured_e_line_1e4", [&rc](double v) { rc.measured_e_line_1e4 = v; });
    reg_num("experiment.measured_e_target_1e4", [&rc](double v) { rc.measured_e_target_1e4 = v; });

    for (const auto& [key, value] : map) {
        auto it = schema.find(key);
        if (it == schema.end()) throw std::runtime_error("config: unknown key '" + key + "'");
        it->second(value);
    }
    if (!rc.occupancy_file.empty()) {
        const Pattern p = load_pattern(rc.occupancy_file);
        rc.lattice = p.lattice;
    }
    return rc;
}

RunConfig RunConfig::load(const std::string& config_text,
                          const std::vector<std::string>& overrides) {
    ConfigMap map = parse_config_text(config_text);
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("override must be section.key=value: " + ov);
        const std::string key = trim(ov.substr(0, eq));
        if (key.find('.') == std::string::npos)
            throw std::runtime_error("override key needs a section: " + key);
        map[key] = parse_value(ov.substr(eq + 1), 0);
    }
    return from_map(map);
}

ExperimentSetup RunConfig::setup() const {
    ExperimentSetup s;
    s.lattice = lattice;
    s.compiler = compiler;
    s.noise = noise;
    s.seed = seed;
    s.workers = workers;
    return s;
}

std::vector<Site> RunConfig::resolve_targets() const {
    std::vector<Site> targets;
    if (!target_sites_flat.empty()) {
        if (target_sites_flat.size() % 3 != 0)
            throw std::runtime_error("experiment.target_sites must be x,y,z triples");
        for (std::size_t i = 0; i < target_sites_flat.size(); i += 3)
            targets.push_back({static_cast<int>(target_sites_flat[i]),
                               static_cast<int>(target_sites_flat[i + 1]),
                               static_cast<int>(target_sites_flat[i + 2])});
        return targets;
    }
    return draw_target_sites(lattice, n_targets, seed);
}

std::string RunConfig::to_manifest_json(const std::string& config_hash,
                                        const std::vector<std::string>& outputs) const {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    j["config_hash"] = config_hash;
    auto& c = j["config"];
    c["run.experiment"] = experiment;
    c["run.seed"] = seed;
    c["run.workers"] = workers;
    c["run.out_dir"] = out_dir;
    c["lattice.nx"] = lattice.nx;
    c["lattice.ny"] = lattice.ny;
    c["lattice.nz"] = lattice.nz;
    c["lattice.spacing_um"] = lattice.spacing_um;
    c["lattice.fill_probability"] = lattice.fill_probability;
    c["lattice.occupancy_file"] = occupancy_file;
    c["gate.f_khz"] = compiler.f_hz / 1e3;
    c["gate.cross_ratio_k"] = compiler.k;
    c["gate.delta_khz"] = compiler.delta_hz / 1e3;
    c["gate.omega_max_khz"] = compiler.omega_max / kTwoPi / 1e3;
    c["gate.transfer_budget"] = compiler.transfer_budget;
    c["gate.t_addr_us"] = compiler.timing.t_addr * 1e6;
    c["gate.t_pi_us"] = compiler.timing.t_pi * 1e6;
    c["gate.t_half_us"] = compiler.timing.t_half * 1e6;
    c["gate.t_ramp_us"] = compiler.timing.t_ramp * 1e6;
    c["gate.t_settle_us"] = compiler.timing.t_settle * 1e6;
    c["gate.t_tail_us"] = compiler.timing.t_tail * 1e6;
    c["gate.integrator_tol"] = compiler.integ.tol;
    c["gate.dummy_swap"] = compiler.dummy_swap;
    c["beams.waist_um"] = compiler.waist_um;
    c["beams.rayleigh_um"] = compiler.rayleigh_um;
    c["noise.amplitude_jitter_sigma"] = noise.amplitude_jitter_sigma;
    c["noise.inhom_broadening_hz"] = noise.inhom_broadening_hz;
    c["noise.f_spread_sigma"] = noise.f_spread_sigma;
    c["noise.scattering_coeff"] = noise.scattering_coeff;
    c["noise.t2_prime_s"] = noise.t2_prime_s;
    c["noise.spam_loss_collision"] = noise.spam_loss_collision;
    c["noise.spam_transfer_error"] = noise.spam_transfer_error;
    c["noise.spam_clearing_error"] = noise.spam_clearing_error;
    c["noise.coherent_aux_leak"] = noise.coherent_aux_leak;
    c["experiment.shots"] = shots;
    c["experiment.theta"] = theta;
    c["experiment.n_targets"] = n_targets;
    c["experiment.alpha_points"] = alpha_points;
    c["experiment.lengths"] = rb.lengths;
    c["experiment.cg_randomizations"] = rb.cg_randomizations;
    c["experiment.pg_randomizations_target"] = rb.pg_randomizations_target;
    c["experiment.pg_randomizations_nontarget"] = rb.pg_randomizations_nontarget;
    c["experiment.shots_per_point"] = rb.shots_per_point;
    c["experiment.synthetic"] = rb.synthetic;
    c["experiment.synthetic_e2"] = rb.synthetic_e2;
    c["experiment.synthetic_d_if"] = rb.synthetic_d_if;
    c["experiment.target_sites"] = target_sites_flat;
    c["experiment.frac_shift_grid"] = frac_shift_grid;
    c["experiment.detuning_min_khz"] = detuning_min_khz;
    c["experiment.detuning_max_khz"] = detuning_max_khz;
    c["experiment.detuning_points"] = detuning_points;
    c["experiment.probe_omega_khz"] = probe_omega_khz;
    c["experiment.n_pulses"] = n_pulses;
    c["experiment.rabi_error_grid"] = rabi_error_grid;
    c["experiment.scheme"] = scheme;
    c["experiment.tau_us"] = tau_us;
    c["experiment.pattern_file"] = pattern_file;
    c["experiment.points_per_branch"] = points_per_branch;
    j["outputs"] = outputs;
    return j.dump(2);
}

RunConfig RunConfig::from_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    nlohmann::json j;
    in >> j;
    ConfigMap map;
    for (const auto& [key, value] : j.at("config").items()) {
        if (value.is_string())
            map[key] = ConfigValue{value.get<std::string>()};
        else if (value.is_boolean())
            map[key] = ConfigValue{value.get<bool>()};
        else if (value.is_array()) {
            std::vector<double> xs;
            for (const auto& x : value) xs.push_back(x.get<double>());
            map[key] = ConfigValue{xs};
        } else {
            map[key] = ConfigValue{value.get<double>()};
        }
    }
    // Empty strings would fail path loading; drop them like absent keys.
    for (auto it = map.begin(); it != map.end();) {
        if (std::holds_alternative<std::string>(it->second.v) && it->second.str().empty() &&
            it->first != "run.experiment")
            it = map.erase(it);
        else
            ++it;
    }
    return from_map(map);
}

}  // namespace latgate
