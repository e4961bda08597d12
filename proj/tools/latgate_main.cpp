#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "latgate/config.hpp"
#include "latgate/verify.hpp"

namespace fs = std::filesystem;
using namespace latgate;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text;
}

int run_experiment(const RunConfig& rc, const std::string& config_text, bool plot_data) {
    fs::create_directories(rc.out_dir);
    const ExperimentSetup setup = rc.setup();
    std::vector<std::string> outputs;
    auto out_path = [&](const std::string& name) { return rc.out_dir + "/" + name; };
    auto write_table = [&](const std::string& name, const std::string& header,
                           const std::vector<std::vector<double>>& rows) {
        write_csv(out_path(name + ".csv"), header, rows);
        outputs.push_back(name + ".csv");
        if (plot_data) {
            std::ostringstream dat;
            dat << "# " << header << "\n";
            char buf[64];
            for (const auto& row : rows) {
                for (std::size_t i = 0; i < row.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%.12g", row[i]);
                    dat << buf << (i + 1 < row.size() ? ' ' : '\n');
                }
            }
            write_file(out_path(name + ".dat"), dat.str());
            outputs.push_back(name + ".dat");
        }
    };

    if (rc.experiment == "phase-curve") {
        const PhaseCurveResult r = run_phase_curve(setup, rc.points_per_branch);
        std::vector<std::vector<double>> rows;
        for (const auto& p : r.points) rows.push_back({p.delta_hz / 1e3, p.phase_rad});
        write_table("phase_curve", "delta_khz,phase_rad", rows);
        std::printf("extremum (f,kf) branch: %.4f kHz; (0,f) branch: %.4f kHz; omega_rms %.4f kHz\n",
                    r.extremum_delta_hz / 1e3, r.second_extremum_hz / 1e3,
                    r.omega / kTwoPi / 1e3);
    } else if (rc.experiment == "spectrum") {
        std::vector<double> grid;
        for (int i = 0; i < rc.detuning_points; ++i)
            grid.push_back(1e3 * (rc.detuning_min_khz +
                                  (rc.detuning_max_khz - rc.detuning_min_khz) * i /
                                      (rc.detuning_points - 1.0)));
        double probe = kTwoPi * rc.probe_omega_khz * 1e3;
        if (probe <= 0.0) {
            SequenceBuilder b(rc.lattice, rc.compiler);
            probe = b.resolve_gate(-0.5 * kPi).omega;
        }
        const SpectrumResult r = run_spectrum(setup, probe, grid, rc.shots);
        std::vector<std::vector<double>> rows;
        for (const auto& rec : r.records)
            rows.push_back({rec.detuning_hz / 1e3, static_cast<double>(rec.cls), rec.transfer});
        write_table("spectrum", "detuning_khz,class,transfer", rows);
        const auto peaks = fit_gaussians(r.records);
        const auto cal = calibrate_from_peaks(peaks);
        nlohmann::ordered_json fits;
        static const char* kPk[3] = {"spectator", "line", "cross"};
        for (std::size_t i = 0; i < peaks.size() && i < 3; ++i) {
            fits[kPk[i]]["center_hz"] = peaks[i].center_hz;
            fits[kPk[i]]["width_hz"] = peaks[i].width_hz;
            fits[kPk[i]]["amplitude"] = peaks[i].amplitude;
        }
        fits["f_hat_hz"] = cal.f_hat_hz;
        fits["k_hat"] = cal.k_hat;
        write_file(out_path("spectrum_fit.json"), fits.dump(2));
        outputs.push_back("spectrum_fit.json");
        std::printf("fitted line center %.3f kHz, cross/line ratio %.4f\n", cal.f_hat_hz / 1e3,
                    cal.k_hat);
    } else if (rc.experiment == "fringe") {
        std::vector<double> alphas;
        for (int i = 0; i < rc.alpha_points; ++i) alphas.push_back(kTwoPi * i / rc.alpha_points);
        const FringeResult r =
            run_fringe(setup, rc.theta, rc.resolve_targets(), alphas, rc.shots);
        std::vector<std::vector<double>> rows;
        for (const auto& rec : r.records)
            rows.push_back({rec.alpha, static_cast<double>(rec.cls), rec.mean_p1, rec.std_err});
        write_table("fringe", "alpha_rad,class,mean_p1,std_err", rows);
        // Per-class sinusoid fits.
        nlohmann::ordered_json fits;
        static const char* kCls[3] = {"target", "line", "spectator"};
        for (int c = 0; c < 3; ++c) {
            std::vector<double> a, p;
            for (const auto& rec : r.records) {
                if (rec.cls != c) continue;
                a.push_back(rec.alpha);
                p.push_back(rec.mean_p1);
            }
            if (a.size() < 5) continue;
            const FringeFit fit = fit_sinusoid(a, p);
            nlohmann::ordered_json o;
            o["n"] = fit.n;
            o["theta_rad"] = fit.theta;
            o["phi_rad"] = fit.phi;
            o["contrast"] = fit.n * fit.n * std::sin(fit.theta);
            o["residual"] = fit.residual;
            o["degenerate"] = fit.degenerate;
            fits[kCls[c]] = std::move(o);
        }
        write_file(out_path("fringe_fit.json"), fits.dump(2));
        outputs.push_back("fringe_fit.json");
        std::printf("mean targeted atoms per shot: %.2f\n", r.mean_targets_per_shot);
    } else if (rc.experiment == "rb") {
        const auto targets = rc.resolve_targets();
        if (targets.size() < 2) throw std::runtime_error("rb needs two target sites");
        const RBResult r = run_rb(setup, rc.rb, {targets[0], targets[1]});
        std::vector<std::vector<double>> rows;
        for (const auto& rec : r.records)
            rows.push_back({static_cast<double>(rec.length), static_cast<double>(rec.cls),
                            rec.mean_p1, rec.std_err});
        write_table("rb", "length,class,mean_p1,std_err", rows);
        // Per-class decay fits and the derived error algebra.
        std::vector<RBRecord> rec_t, rec_l, rec_s;
        for (const auto& rec : r.records) {
            if (rec.cls == kClsTarget) rec_t.push_back(rec);
            if (rec.cls == kClsLine) rec_l.push_back(rec);
            if (rec.cls == kClsSpectator) rec_s.push_back(rec);
        }
        nlohmann::ordered_json fits;
        auto fit_json = [&](const std::vector<RBRecord>& recs, std::optional<double> d_fixed) {
            const RBFit fit = fit_rb(recs, d_fixed, 200, rc.seed);
            nlohmann::ordered_json o;
            o["e2"] = fit.e2;
            o["e2_sigma"] = fit.e2_sigma;
            o["d_if"] = fit.d_if;
            o["d_if_sigma"] = fit.d_if_sigma;
            o["d_if_fixed"] = fit.d_if_fixed;
            o["non_decaying"] = fit.non_decaying;
            return std::pair(fit, o);
        };
        std::optional<RBFit> fs, fl, ft;
        if (rec_s.size() >= 3) {
            auto [fit, o] = fit_json(rec_s, std::nullopt);
            fs = fit;
            fits["spectator"] = std::move(o);
        }
        if (rec_l.size() >= 3) {
            auto [fit, o] = fit_json(rec_l, std::nullopt);
            fl = fit;
            fits["line"] = std::move(o);
        }
        if (rec_t.size() >= 3) {
            auto [fit, o] = fit_json(rec_t, fs ? std::optional<double>(fs->d_if) : std::nullopt);
            ft = fit;
            fits["target"] = std::move(o);
        }
        if (fs && fl && ft) {
            const auto dec = decompose_errors({ft->e2, ft->e2_sigma}, {fs->e2, fs->e2_sigma},
                                              {fl->e2, fl->e2_sigma});
            fits["per_gate"]["e_t"] = dec.e_t.value;
            fits["per_gate"]["e_t_sigma"] = dec.e_t.sigma;
            fits["per_gate"]["e_s"] = dec.e_s.value;
            fits["per_gate"]["e_l"] = dec.e_l.value;
            const auto x = crosstalk_average(dec.e_s, dec.e_l, 107, 16);
            fits["crosstalk"]["value"] = x.value;
            fits["crosstalk"]["sigma"] = x.sigma;
        }
        write_file(out_path("rb_fit.json"), fits.dump(2));
        outputs.push_back("rb_fit.json");
    } else if (rc.experiment == "robustness") {
        auto targets = rc.resolve_targets();
        const RobustnessResult r = run_robustness(setup, targets, rc.frac_shift_grid, rc.shots);
        std::vector<std::vector<double>> rows;
        for (const auto& p : r.points) rows.push_back({p.frac_shift, p.f2, p.sigma});
        write_table("robustness", "frac_shift,f2,sigma", rows);
    } else if (rc.experiment == "pattern") {
        Pattern pat;
        if (!rc.pattern_file.empty()) {
            pat = load_pattern(rc.pattern_file);
        } else {
            pat.lattice = rc.lattice;
            pat.targets = rc.resolve_targets();
        }
        const PatternResult r = run_pattern(setup, pat, rc.theta, rc.shots);
        std::vector<std::vector<double>> rows;
        for (const auto& sc : r.sites)
            rows.push_back({static_cast<double>(sc.site.x), static_cast<double>(sc.site.y),
                            static_cast<double>(sc.site.z), sc.targeted ? 1.0 : 0.0,
                            static_cast<double>(sc.present), static_cast<double>(sc.bright)});
        write_table("pattern", "x,y,z,targeted,present,bright", rows);
    } else if (rc.experiment == "echo-stress") {
        EchoScheme scheme = EchoScheme::Cycled;
        if (rc.scheme == "naive")
            scheme = EchoScheme::Naive;
        else if (rc.scheme == "xy")
            scheme = EchoScheme::XY;
        else if (rc.scheme != "cycled")
            throw std::runtime_error("unknown echo scheme: " + rc.scheme);
        const EchoStressResult r = run_echo_stress(setup, rc.n_pulses, rc.rabi_error_grid,
                                                   scheme, rc.tau_us * 1e-6, rc.alpha_points,
                                                   rc.shots);
        std::vector<std::vector<double>> rows;
        for (const auto& p : r.points) rows.push_back({p.rabi_error, p.contrast});
        write_table("echo_stress", "rabi_error,contrast", rows);
    } else if (rc.experiment == "budget") {
        SequenceBuilder b(rc.lattice, rc.compiler);
        const ResolvedGate rg = b.resolve_gate(rc.theta >= 0 ? -rc.theta : rc.theta);
        const OperatingPoint op = operating_point(rc.compiler.f_hz, rc.compiler.k, rg.omega,
                                                  rc.compiler.timing.t_addr, rc.compiler.integ);
        BudgetInputs in;
        in.f_hz = rc.compiler.f_hz;
        in.k = rc.compiler.k;
        in.delta_op_hz = rg.delta_hz;
        in.omega = rg.omega;
        in.t_addr = rc.compiler.timing.t_addr;
        in.light_exposure_s = rc.compiler.timing.light_exposure();
        in.curvature = op.curvature;
        in.theta = rc.theta;
        in.noise = rc.noise;
        in.integ = rc.compiler.integ;
        in.measured_e_spectator = rc.measured_e_spectator_1e4 * 1e-4;
        in.measured_e_line = rc.measured_e_line_1e4 * 1e-4;
        in.measured_e_target = rc.measured_e_target_1e4 * 1e-4;
        const ErrorBudget budget = assemble_budget(in);
        write_file(out_path("budget.txt"), budget.to_text());
        write_file(out_path("budget.csv"), budget.to_csv());
        outputs.push_back("budget.txt");
        outputs.push_back("budget.csv");
        std::fputs(budget.to_text().c_str(), stdout);
    } else {
        throw std::runtime_error("unknown experiment: " + rc.experiment);
    }

    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(content_hash(config_text)));
    write_file(out_path("manifest.json"), rc.to_manifest_json(hash, outputs));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Targeted phase-shift gate simulator and benchmarking suite"};
    app.require_subcommand(1);

    std::string config_path;
    std::string manifest_path;
    std::string experiment;
    std::string out_dir;
    std::vector<std::string> overrides;
    long long seed = -1;
    int workers = 0;
    bool plot_data = false;

    CLI::App* run = app.add_subcommand("run", "run one experiment and emit CSV + manifest");
    run->add_option("--config", config_path, "config file (TOML-style)");
    run->add_option("--from-manifest", manifest_path, "re-run from an emitted manifest");
    run->add_option("--experiment", experiment,
                    "fringe|rb|robustness|spectrum|phase-curve|pattern|echo-stress|budget");
    run->add_option("--seed", seed, "master seed");
    run->add_option("--workers", workers, "worker thread count");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--set", overrides, "section.key=value overrides")->take_all();
    run->add_flag("--plot-data", plot_data, "also emit space-separated .dat files");

    CLI::App* verify = app.add_subcommand("verify", "run the fast acceptance subset");
    double verify_tol = 1e-10;
    verify->add_option("--integrator-tol", verify_tol, "integrator tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::string text;
            RunConfig rc;
            if (!manifest_path.empty()) {
                rc = RunConfig::from_manifest_file(manifest_path);
                text = read_file(manifest_path);
            } else {
                if (!config_path.empty()) {
                    text = read_file(config_path);
                } else if (const char* env = std::getenv("LATGATE_CONFIG")) {
                    config_path = env;
                    text = read_file(config_path);
                }
                rc = RunConfig::load(text, overrides);
            }
            if (!experiment.empty()) rc.experiment = experiment;
            if (seed >= 0) rc.seed = static_cast<std::uint64_t>(seed);
            if (workers > 0) rc.workers = workers;
            if (!out_dir.empty()) rc.out_dir = out_dir;
            return run_experiment(rc, text, plot_data);
        }
        if (verify->parsed()) {
            VerifyOptions opts;
            opts.integ.tol = verify_tol;
            opts.report = [](const std::string& line) { std::puts(line.c_str()); };
            const auto checks = run_verify(opts);
            bool all = true;
            for (const auto& c : checks) all = all && c.passed;
            std::printf("%s (%zu checks)\n", all ? "VERIFY PASSED" : "VERIFY FAILED",
                        checks.size());
            return all ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
