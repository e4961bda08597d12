#include "latgate/verify.hpp"

#include <cstdio>

#include "latgate/experiments.hpp"

namespace latgate {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

}  // namespace

std::vector<VerifyCheck> run_verify(const VerifyOptions& opts) {
    std::vector<VerifyCheck> checks;
    auto add = [&](const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({name, pass, detail});
        if (opts.report)
            opts.report((pass ? "[PASS] " : "[FAIL] ") + name + (detail.empty() ? "" : ": ") +
                        detail);
    };

    LatticeConfig lat;
    Rng occ_rng(opts.seed, 0x0CC);
    lat.occupancy = lat.sample_occupancy(occ_rng);
    CompilerConfig cc;
    cc.integ = opts.integ;
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    for (const Site& t : targets) lat.occupancy[lat.index(t)] = 1;

    // 1. Noiseless echo cancellation of a compiled Rz(pi/2).
    try {
        SceneSet scenes;
        PulseSequence seq = compile_rz(lat, cc, targets, 0.5 * kPi, &scenes);
        const NoiseConfig off = NoiseConfig::all_off();
        SequenceSimulator sim(lat, scenes, seq, off, opts.integ);
        std::vector<Site> sites;
        for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
        sim.bind_atoms(sites);
        sim.begin_shot(sample_shot(off, lat.n_sites(),
                                   static_cast<int>(scenes.beams.size()), 0, 0));
        double worst_nt = 0.0, worst_t = 0.0;
        for (int i = 0; i < lat.n_sites(); ++i) {
            if (!lat.occupancy[i]) continue;
            const Site s = lat.site_at(i);
            const bool is_target = std::find(targets.begin(), targets.end(), s) != targets.end();
            if (is_target) {
                Rng rng(1);
                AtomState before = AtomState::equator_state();
                AtomState after = sim.run_atom(i, before, rng);
                worst_t = std::max(worst_t,
                                   std::abs(differential_phase(before, after) - 0.5 * kPi));
            } else {
                const Mat3 u = sim.atom_propagator(i);
                worst_nt = std::max(worst_nt, rotation_angle_from_identity(u.qubit_block()));
            }
        }
        add("echo-cancellation",
            worst_nt < 1e-6 && worst_t < 1e-4,
            fmt("worst non-target %.2e rad, worst target offset %.2e rad", worst_nt, worst_t));
    } catch (const std::exception& e) {
        add("echo-cancellation", false, e.what());
    }

    // 2. Rotation-composition equivalence against analytic rotations.
    try {
        Rng rng(opts.seed, 0xE92);
        double worst = 0.0;
        for (int it = 0; it < 20; ++it) {
            double ax[3];
            double nrm = 0.0;
            for (double& a : ax) {
                a = rng.normal();
                nrm += a * a;
            }
            nrm = std::sqrt(nrm);
            for (double& a : ax) a /= nrm;
            const double th = (2.0 * rng.uniform() - 1.0) * kPi * 0.999;
            SceneSet scenes;
            const PulseSequence seq = compile_rotation(lat, cc, {ax[0], ax[1], ax[2]}, th,
                                                       targets, &scenes);
            const Mat2 u = ideal_unitary(seq, AtomClass::Target);
            const Mat2 ref = rot_axis(th, ax[0], ax[1], ax[2]);
            worst = std::max(worst, unitary_distance(u, ref));
            worst = std::max(worst,
                             unitary_distance(ideal_unitary(seq, AtomClass::Spectator), Mat2{}));
        }
        add("rotation-composition", worst < 1e-8, fmt("worst operator distance %.2e", worst));
    } catch (const std::exception& e) {
        add("rotation-composition", false, e.what());
    }

    // 2b. Integrator accuracy against a tight step-halving reference; this
    // is the check a degraded tolerance trips (cancellation itself is robust
    // to correlated integrator error).
    try {
        Pulse p;
        p.kind = PulseKind::AddressingShift;
        p.duration = 120e-6;
        p.peak_rabi = addressing_peak_from_rms(kTwoPi * 8e3, Envelope::Blackman);
        p.detuning = kTwoPi * 75e3;
        const double aux_det = kTwoPi * 23.7e3;
        IntegratorOpts tight;
        tight.tol = 1e-12;
        const AtomState before = AtomState::equator_state();
        const double got =
            differential_phase(before, evolve(before, p, aux_det, 0.0, opts.integ));
        const double ref = differential_phase(before, evolve(before, p, aux_det, 0.0, tight));
        add("integrator-accuracy", std::abs(got - ref) < 1e-6,
            fmt("pulse-phase deviation %.2e rad vs tight reference", std::abs(got - ref)));
    } catch (const std::exception& e) {
        add("integrator-accuracy", false, e.what());
    }

    // 3. Perturbative formula vs exact phase in the adiabatic regime.
    try {
        PhaseGateParams p;
        p.f_hz = cc.f_hz;
        p.k = cc.k;
        p.t_addr = 600e-6;
        double worst = 0.0;
        for (double u : {1.2, 1.35, 1.5, 1.65}) {
            p.delta_hz = u * p.f_hz;
            const double cap = kTwoPi * std::min(p.delta_hz - p.f_hz, p.k * p.f_hz - p.delta_hz) /
                               10.0;
            for (double frac : {1.0, 0.5}) {
                p.omega = cap * frac;
                const double ex = exact_gate_phase(p, target_stage_shifts(p), true, opts.integ);
                const double e1 = eq1_phase(p);
                worst = std::max(worst, std::abs((ex - e1) / e1));
            }
        }
        add("eq1-vs-exact", worst < 0.05, fmt("worst relative deviation %.3f", worst));
    } catch (const std::exception& e) {
        add("eq1-vs-exact", false, e.what());
    }

    // 4a. Fringe-fit round trip.
    try {
        std::vector<double> alpha, p1;
        for (int i = 0; i < 16; ++i) {
            const double a = kTwoPi * i / 16.0;
            alpha.push_back(a);
            p1.push_back(0.5 * (1.0 + std::sin(0.5 * kPi) * std::cos(a + 0.5 * kPi)));
        }
        const FringeFit fit = fit_sinusoid(alpha, p1, {1.0, 0.0});
        const bool ok = std::abs(fit.n - 1.0) < 1e-6 && std::abs(fit.theta - 0.5 * kPi) < 1e-6 &&
                        std::abs(wrap_angle(fit.phi - 0.5 * kPi)) < 1e-6;
        add("fringe-fit-roundtrip", ok,
            fmt("n=%.6f theta-err=%.2e", fit.n, std::abs(fit.theta - 0.5 * kPi)));
    } catch (const std::exception& e) {
        add("fringe-fit-roundtrip", false, e.what());
    }

    // 4b. RB estimator round trip on the synthetic Eq.-3 channel.
    try {
        ExperimentSetup s;
        s.seed = opts.seed;
        RBConfig cfg;
        cfg.lengths = {1, 2, 4, 8, 16, 32};
        cfg.synthetic = true;
        cfg.synthetic_e2 = 55e-4;
        cfg.synthetic_d_if = 0.1128;
        cfg.shots_per_point = 100;
        const RBResult rb = run_rb(s, cfg, {Site{1, 1, 1}, Site{3, 3, 3}});
        const RBFit fit = fit_rb(rb.records, 0.1128, 100, opts.seed);
        const double dev = std::abs(fit.e2 - 55e-4);
        const bool ok = dev <= 2.0 * std::max(fit.e2_sigma, 1e-4);
        add("rb-estimator-roundtrip", ok,
            fmt("fitted E2=%.5f (truth 0.0055), sigma=%.5f", fit.e2, fit.e2_sigma));
    } catch (const std::exception& e) {
        add("rb-estimator-roundtrip", false, e.what());
    }

    return checks;
}

}  // namespace latgate
