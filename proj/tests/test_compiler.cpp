#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "latgate/compiler.hpp"
#include "latgate/simulator.hpp"

using namespace latgate;

namespace {

LatticeConfig filled_lattice(std::uint64_t seed, const std::vector<Site>& force) {
    LatticeConfig lat;
    Rng rng(seed, 0x0CC);
    lat.occupancy = lat.sample_occupancy(rng);
    for (const Site& s : force) lat.occupancy[lat.index(s)] = 1;
    return lat;
}

// Worst non-target qubit rotation angle over all occupied sites (noiseless).
double worst_nontarget_angle(const LatticeConfig& lat, const SceneSet& scenes,
                             const PulseSequence& seq, const std::vector<Site>& targets) {
    const NoiseConfig off = NoiseConfig::all_off();
    SequenceSimulator sim(lat, scenes, seq, off);
    std::vector<Site> sites;
    for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
    sim.bind_atoms(sites);
    sim.begin_shot(sample_shot(off, lat.n_sites(), static_cast<int>(scenes.beams.size()), 0, 0));
    double worst = 0.0;
    for (int i = 0; i < lat.n_sites(); ++i) {
        if (!lat.occupancy.empty() && !lat.occupancy[i]) continue;
        const Site s = lat.site_at(i);
        if (std::find(targets.begin(), targets.end(), s) != targets.end()) continue;
        worst = std::max(worst, rotation_angle_from_identity(sim.atom_propagator(i).qubit_block()));
    }
    return worst;
}

double target_phase(const LatticeConfig& lat, const SceneSet& scenes, const PulseSequence& seq,
                    const Site& t) {
    const NoiseConfig off = NoiseConfig::all_off();
    SequenceSimulator sim(lat, scenes, seq, off);
    std::vector<Site> sites;
    for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
    sim.bind_atoms(sites);
    sim.begin_shot(sample_shot(off, lat.n_sites(), static_cast<int>(scenes.beams.size()), 0, 0));
    Rng rng(1);
    const AtomState before = AtomState::equator_state();
    const AtomState after = sim.run_atom(lat.index(t), before, rng);
    return differential_phase(before, after);
}

}  // namespace

TEST_CASE("compile_rz: zero angle still carries four echo pulses and acts as identity") {
    const std::vector<Site> targets = {{1, 1, 1}, {3, 3, 3}};
    const LatticeConfig lat = filled_lattice(5, targets);
    CompilerConfig cc;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, 0.0, &scenes);
    int echoes = 0;
    for (const auto& e : seq.events)
        if (e.role == PulseRole::EchoPi) ++echoes;
    CHECK(echoes == 4);
    for (const auto& e : seq.events)
        if (e.kind == EventKind::AddressingPulse) CHECK(e.pulse.peak_rabi == 0.0);
    CHECK(worst_nontarget_angle(lat, scenes, seq, targets) < 1e-8);
    CHECK(rotation_angle_from_identity(
              [&] {
                  const NoiseConfig off = NoiseConfig::all_off();
                  SequenceSimulator sim(lat, scenes, seq, off);
                  std::vector<Site> sites;
                  for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
                  sim.bind_atoms(sites);
                  sim.begin_shot(sample_shot(off, lat.n_sites(),
                                             static_cast<int>(scenes.beams.size()), 0, 0));
                  return sim.atom_propagator(lat.index(targets[0])).qubit_block();
              }()) < 1e-8);
}

TEST_CASE("compile_rz: pi/2 on distinct-plane targets, non-targets cancel") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(6, targets);
    CompilerConfig cc;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, 0.5 * kPi, &scenes);
    CHECK(worst_nontarget_angle(lat, scenes, seq, targets) < 1e-6);
    CHECK(std::abs(target_phase(lat, scenes, seq, targets[0]) - 0.5 * kPi) < 1e-8);
    CHECK(std::abs(target_phase(lat, scenes, seq, targets[1]) - 0.5 * kPi) < 1e-8);
}

TEST_CASE("compile_rz: same-plane generic pair works, shared-line pair is rejected") {
    CompilerConfig cc;
    {
        const std::vector<Site> targets = {{1, 2, 2}, {3, 4, 2}};
        const LatticeConfig lat = filled_lattice(7, targets);
        SceneSet scenes;
        const PulseSequence seq = compile_rz(lat, cc, targets, -0.4, &scenes);
        CHECK(worst_nontarget_angle(lat, scenes, seq, targets) < 1e-6);
        CHECK(std::abs(target_phase(lat, scenes, seq, targets[0]) + 0.4) < 1e-8);
    }
    {
        const std::vector<Site> targets = {{1, 2, 2}, {3, 2, 2}};  // shared row
        const LatticeConfig lat = filled_lattice(8, targets);
        CHECK_THROWS_AS(compile_rz(lat, cc, targets, 0.5, nullptr), std::runtime_error);
    }
}

TEST_CASE("compile_rz: single target uses a virtual partner and still cancels") {
    const std::vector<Site> targets = {{2, 2, 2}};
    const LatticeConfig lat = filled_lattice(9, targets);
    CompilerConfig cc;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, 0.3, &scenes);
    CHECK(std::abs(target_phase(lat, scenes, seq, targets[0]) - 0.3) < 1e-8);
    CHECK(worst_nontarget_angle(lat, scenes, seq, targets) < 1e-6);
}

TEST_CASE("stage and class ledger reproduces the four signed terms") {
    // Target A is cross in stage 1, line in stages 2 and 4, spectator in
    // stage 3; with pi-after echo signs (+,-,+,-) the natural-sign compile
    // realizes exactly the four-term difference.
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(10, targets);
    CompilerConfig cc;
    cc.delta_hz = 76e3;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, -0.9, &scenes);
    REQUIRE(seq.stages.size() == 4);
    const int a_idx = lat.index(targets[0]);
    const int b_idx = lat.index(targets[1]);
    const std::array<SiteClass, 4> expect_a = {SiteClass::Cross, SiteClass::Line,
                                               SiteClass::Spectator, SiteClass::Line};
    const std::array<SiteClass, 4> expect_b = {SiteClass::Spectator, SiteClass::Line,
                                               SiteClass::Cross, SiteClass::Line};
    for (int s = 0; s < 4; ++s) {
        CHECK(scenes.scenes[seq.stages[s].scene].class_of(a_idx) == expect_a[s]);
        CHECK(scenes.scenes[seq.stages[s].scene].class_of(b_idx) == expect_b[s]);
    }
    // Echo pulses follow the addressing stage for a natural-sign gate.
    PhaseGateParams p;
    p.f_hz = cc.f_hz;
    p.k = cc.k;
    p.delta_hz = cc.delta_hz;
    p.t_addr = cc.timing.t_addr;
    double omega = 0.0;
    for (const auto& e : seq.events)
        if (e.kind == EventKind::AddressingPulse) omega = e.pulse.peak_rabi;
    p.omega = omega * std::sqrt(kBlackmanSqArea);
    CHECK(exact_gate_phase(p, target_stage_shifts(p), true) == doctest::Approx(-0.9).epsilon(1e-9));
}

TEST_CASE("dummy-beam x/y swap preserves the cancellation") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(11, targets);
    CompilerConfig cc;
    cc.dummy_swap = true;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, 0.5 * kPi, &scenes);
    CHECK(worst_nontarget_angle(lat, scenes, seq, targets) < 1e-6);
    CHECK(std::abs(target_phase(lat, scenes, seq, targets[0]) - 0.5 * kPi) < 1e-8);
}

TEST_CASE("sequence timing: one pi/2 gate is four stages plus ramp dwell") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(12, targets);
    CompilerConfig cc;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, 0.5 * kPi, &scenes);
    const GateTiming& tm = cc.timing;
    const double expected =
        4.0 * (tm.t_addr + tm.t_pi + 2.0 * tm.t_ramp + tm.t_settle + tm.t_tail);
    CHECK(seq.total_time == doctest::Approx(expected).epsilon(1e-12));
    // Per-stage light exposure equals the effective full-power time.
    for (const auto& w : seq.stages)
        CHECK(w.light_exposure_s == doctest::Approx(252e-6).epsilon(1e-12));
}

TEST_CASE("large angles split into chunks") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(13, targets);
    CompilerConfig cc;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, kPi, &scenes);
    CHECK(seq.gates.size() == 2);
    CHECK(std::abs(target_phase(lat, scenes, seq, targets[0]) - kPi) < 1e-7);
    CHECK(worst_nontarget_angle(lat, scenes, seq, targets) < 1e-6);
}

TEST_CASE("compile_pauli: ledger bookkeeping and identity") {
    const LatticeConfig lat;
    CompilerConfig cc;
    {
        SequenceBuilder b(lat, cc);
        b.add_pauli(PauliGate::Zp);
        b.add_pauli(PauliGate::Zm);
        CHECK(b.frame_ledger() == doctest::Approx(0.0));
    }
    {
        const PulseSequence seq = compile_pauli(lat, cc, PauliGate::I);
        CHECK(seq.events.empty());
    }
    {
        const PulseSequence seq = compile_pauli(lat, cc, PauliGate::Xp);
        REQUIRE(seq.events.size() == 1);
        CHECK(seq.events[0].pulse.area() == doctest::Approx(kPi));
    }
}

TEST_CASE("frame shift makes the next pulse act about the rotated axis") {
    const LatticeConfig lat;
    CompilerConfig cc;
    SequenceBuilder b(lat, cc);
    b.add_pauli(PauliGate::Zp);
    b.add_global_pulse(0.5 * kPi, 0.0, PulseRole::CgHalfPi);
    const PulseSequence seq = b.take();
    // Ideal unitary equals Rz(pi) then Rx(pi/2) as true matrices; the pulse
    // behaves as R(-x)(pi/2) in the rotated frame.
    const Mat2 ideal = ideal_unitary(seq, AtomClass::Spectator);
    const Mat2 ref = rot_xy(0.5 * kPi, 0.0) * rot_z(kPi);
    CHECK(unitary_distance(ideal, ref) < 1e-12);
    const Mat2 ref2 = rot_z(kPi) * rot_xy(0.5 * kPi, kPi);
    CHECK(unitary_distance(ideal, ref2) < 1e-12);
}

TEST_CASE("frame consistency: inserting Rz(pi) twice changes nothing measurable") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(14, targets);
    CompilerConfig cc;
    auto build = [&](bool with_double_z) {
        SequenceBuilder b(lat, cc);
        b.add_global_pulse(0.5 * kPi, 0.5 * kPi, PulseRole::OpeningPulse);
        if (with_double_z) {
            b.add_pauli(PauliGate::Zp);
            b.add_pauli(PauliGate::Zp);
        }
        b.add_target_rz(targets, 0.5 * kPi);
        b.add_global_pulse(0.5 * kPi, -0.5 * kPi, PulseRole::DetectionPulse);
        return apply_phase_cycling(b.take());
    };
    const PulseSequence s1 = build(false);
    const PulseSequence s2 = build(true);
    SceneSet scenes;
    (void)compile_rz(lat, cc, targets, 0.5 * kPi, &scenes);
    const NoiseConfig off = NoiseConfig::all_off();
    for (const Site& t : {targets[0], Site{0, 0, 0}}) {
        double p1[2];
        int k = 0;
        for (const PulseSequence* seq : {&s1, &s2}) {
            SequenceSimulator sim(lat, scenes, *seq, off);
            std::vector<Site> sites;
            for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
            sim.bind_atoms(sites);
            sim.begin_shot(sample_shot(off, lat.n_sites(),
                                       static_cast<int>(scenes.beams.size()), 0, 0));
            Rng rng(1);
            p1[k++] = sim.run_atom(lat.index(t), AtomState::one_state(), rng).p1();
        }
        CHECK(std::abs(p1[0] - p1[1]) < 1e-10);
    }
}

TEST_CASE("phase cycling: uninterrupted runs follow {y,y,-y,-y}") {
    const LatticeConfig lat;
    CompilerConfig cc;
    SequenceBuilder b(lat, cc);
    for (int i = 0; i < 8; ++i) b.add_global_pulse(kPi, 0.5 * kPi, PulseRole::EchoPi);
    const PulseSequence seq = b.take();
    const EchoPhasePlan plan = plan_echo_phases(seq);
    REQUIRE(plan.axes.size() == 8);
    const std::vector<EchoAxis> expect = {EchoAxis::Yp, EchoAxis::Yp, EchoAxis::Ym, EchoAxis::Ym,
                                          EchoAxis::Yp, EchoAxis::Yp, EchoAxis::Ym, EchoAxis::Ym};
    for (int i = 0; i < 8; ++i) CHECK(plan.axes[i] == expect[i]);
}

TEST_CASE("phase cycling rule 2: PG sharing the CG axis flips the first echo pulse") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(15, targets);
    CompilerConfig cc;
    SequenceBuilder b(lat, cc);
    b.add_pauli(PauliGate::Xp);
    b.add_target_rotation({0, 1, 0}, 0.5 * kPi, targets);  // Ry(pi/2): Rx(+-pi/2) sandwich
    const PulseSequence seq = b.take();
    const EchoPhasePlan plan = plan_echo_phases(seq);
    REQUIRE(plan.axes.size() == 4);
    CHECK(plan.axes[0] == EchoAxis::Xm);  // opposite the +x PG torque
    CHECK(plan.axes[1] == EchoAxis::Yp);
    CHECK(plan.axes[2] == EchoAxis::Ym);
    CHECK(plan.axes[3] == EchoAxis::Xp);
    // A y-axis PG against an x-axis sandwich keeps the pi/2 pulse's axis.
    SequenceBuilder b2(lat, cc);
    b2.add_pauli(PauliGate::Yp);
    b2.add_target_rotation({0, 1, 0}, 0.5 * kPi, targets);
    const EchoPhasePlan plan2 = plan_echo_phases(b2.take());
    REQUIRE(plan2.axes.size() == 4);
    CHECK(plan2.axes[0] == EchoAxis::Xm);  // the opening pulse of Ry is R(-x)(pi/2)
}

TEST_CASE("cycled sequence still returns every class to its input") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(16, targets);
    CompilerConfig cc;
    SequenceBuilder b(lat, cc);
    b.add_pauli(PauliGate::Xp);
    b.add_target_rotation({1, 0, 0}, 0.5 * kPi, targets);
    b.add_pauli(PauliGate::Ym);
    b.add_target_rotation({0, -1, 0}, 0.5 * kPi, targets);
    PulseSequence seq = apply_phase_cycling(b.take());
    // The compiled non-target action must match the ideal unitary exactly in
    // noiseless simulation.
    SceneSet& scenes = b.scenes();
    const NoiseConfig off = NoiseConfig::all_off();
    SequenceSimulator sim(lat, scenes, seq, off);
    std::vector<Site> sites;
    for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
    sim.bind_atoms(sites);
    sim.begin_shot(sample_shot(off, lat.n_sites(), static_cast<int>(scenes.beams.size()), 0, 0));
    const Mat2 u = sim.atom_propagator(lat.index({0, 0, 0})).qubit_block();
    const Mat2 ideal = ideal_unitary(seq, AtomClass::Spectator);
    CHECK(unitary_distance(u, ideal) < 1e-6);  // bounded by the spectator-class leak
}

TEST_CASE("ideal_unitary matches a brute-force product of analytic gates") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(17, targets);
    CompilerConfig cc;
    Rng rng(21);
    SequenceBuilder b(lat, cc);
    Mat2 brute_t, brute_nt;
    for (int g = 0; g < 20; ++g) {
        const int pg = static_cast<int>(rng.below(7));
        const PauliGate gates[] = {PauliGate::Xp, PauliGate::Xm, PauliGate::Yp, PauliGate::Ym,
                                   PauliGate::Zp, PauliGate::Zm, PauliGate::I};
        b.add_pauli(gates[pg]);
        const Mat2 pg_m = [&] {
            switch (gates[pg]) {
                case PauliGate::Xp: return rot_xy(kPi, 0.0);
                case PauliGate::Xm: return rot_xy(kPi, kPi);
                case PauliGate::Yp: return rot_xy(kPi, 0.5 * kPi);
                case PauliGate::Ym: return rot_xy(kPi, -0.5 * kPi);
                case PauliGate::Zp: return rot_z(kPi);
                case PauliGate::Zm: return rot_z(-kPi);
                default: return Mat2::identity();
            }
        }();
        brute_t = pg_m * brute_t;
        brute_nt = pg_m * brute_nt;
        const double axes[4][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
        const int ax = static_cast<int>(rng.below(4));
        b.add_target_rotation({axes[ax][0], axes[ax][1], axes[ax][2]}, 0.5 * kPi, targets);
        brute_t = rot_axis(0.5 * kPi, axes[ax][0], axes[ax][1], axes[ax][2]) * brute_t;
    }
    const PulseSequence seq = b.take();
    CHECK(unitary_distance(ideal_unitary(seq, AtomClass::Target), brute_t) < 1e-10);
    CHECK(unitary_distance(ideal_unitary(seq, AtomClass::Spectator), brute_nt) < 1e-10);
}

TEST_CASE("compiled Rz ideal unitary: diag phase for targets, identity otherwise") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(18, targets);
    CompilerConfig cc;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, 0.5 * kPi, &scenes);
    CHECK(unitary_distance(ideal_unitary(seq, AtomClass::Target), rot_z(0.5 * kPi)) < 1e-12);
    CHECK(unitary_distance(ideal_unitary(seq, AtomClass::Spectator), Mat2::identity()) < 1e-12);
}

TEST_CASE("detection plans") {
    SUBCASE("identity when already at |1>") {
        const DetectionPlan p = compile_detection(Mat2::identity(), 0.0);
        CHECK(p.kind == DetectionPlan::Kind::Identity);
    }
    SUBCASE("half-pi completion after Rx(pi/2)") {
        const DetectionPlan p = compile_detection(rot_xy(0.5 * kPi, 0.0), 0.0);
        REQUIRE(p.kind == DetectionPlan::Kind::SingleHalfPi);
        const Mat2 u = rot_xy(0.5 * kPi, p.phase1) * rot_xy(0.5 * kPi, 0.0);
        AtomState s = AtomState::one_state();
        s.apply(Mat3::embed(u, 0, 1));
        CHECK(s.p1() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("pi pulse from |0>") {
        const DetectionPlan p = compile_detection(rot_xy(kPi, 0.25), 0.0);
        CHECK(p.kind == DetectionPlan::Kind::SinglePi);
    }
    SUBCASE("generic state falls back to two pulses, flagged") {
        const Mat2 ideal = rot_xy(0.3, 0.7);
        const DetectionPlan p = compile_detection(ideal, 0.0);
        CHECK(p.kind == DetectionPlan::Kind::TwoPulse);
        CHECK(p.fallback);
        const Mat2 u = rot_xy(0.5 * kPi, p.phase2 + p.frame_pre) *
                       rot_xy(0.5 * kPi, p.phase1 + p.frame_pre) * rot_z(p.frame_pre) * ideal;
        AtomState s = AtomState::one_state();
        s.apply(Mat3::embed(u, 0, 1));
        CHECK(s.p1() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("sequence dump is valid JSON with the expected event fields") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(19, targets);
    CompilerConfig cc;
    cc.delta_hz = 78e3;
    SceneSet scenes;
    const PulseSequence seq = compile_rz(lat, cc, targets, -0.5 * kPi, &scenes);
    const std::string dump = seq.dump_json();
    CHECK(dump.find("\"kind\": \"addressing_pulse\"") != std::string::npos);
    CHECK(dump.find("\"kind\": \"qubit_pulse\"") != std::string::npos);
    CHECK(dump.find("\"role\": \"echo_pi\"") != std::string::npos);
    CHECK(dump.find("\"light\"") != std::string::npos);
    // Golden structure: 4 addressing pulses, 4 echo pulses, 20 light windows.
    int addr = 0, echo = 0;
    for (const auto& e : seq.events) {
        addr += e.kind == EventKind::AddressingPulse;
        echo += e.role == PulseRole::EchoPi;
    }
    CHECK(addr == 4);
    CHECK(echo == 4);
}

TEST_CASE("compile error when the angle is unreachable under the Rabi cap") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(20, targets);
    CompilerConfig cc;
    cc.omega_max = kTwoPi * 2e3;  // far too weak for pi/2
    CHECK_THROWS(compile_rz(lat, cc, targets, 0.5 * kPi, nullptr));
}

TEST_CASE("abstract gate dispatch") {
    const std::vector<Site> targets = {{1, 2, 1}, {3, 1, 3}};
    const LatticeConfig lat = filled_lattice(30, targets);
    CompilerConfig cc;
    SequenceBuilder b(lat, cc);
    GateSpec pg;
    pg.kind = GateKind::PauliPG;
    pg.axis = {0, 0, 1};
    pg.angle = kPi;
    add_gate(b, pg);
    GateSpec rot;
    rot.kind = GateKind::TargetRotation;
    rot.axis = {0, 1, 0};
    rot.angle = 0.5 * kPi;
    rot.targets = targets;
    add_gate(b, rot);
    const PulseSequence seq = b.take();
    const Mat2 ideal = ideal_unitary(seq, AtomClass::Target);
    const Mat2 ref = rot_axis(0.5 * kPi, 0, 1, 0) * rot_z(kPi);
    CHECK(unitary_distance(ideal, ref) < 1e-10);
    GateSpec det;
    det.kind = GateKind::Detection;
    SequenceBuilder b2(lat, cc);
    CHECK_THROWS_AS(add_gate(b2, det), std::domain_error);
}
