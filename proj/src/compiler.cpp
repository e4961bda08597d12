#include "latgate/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace latgate {

double echo_axis_phase(EchoAxis a) {
    switch (a) {
        case EchoAxis::Yp: return 0.5 * kPi;
        case EchoAxis::Ym: return -0.5 * kPi;
        case EchoAxis::Xp: return 0.0;
        case EchoAxis::Xm: return kPi;
    }
    return 0.0;
}

namespace {

EchoAxis opposite(EchoAxis a) {
    switch (a) {
        case EchoAxis::Yp: return EchoAxis::Ym;
        case EchoAxis::Ym: return EchoAxis::Yp;
        case EchoAxis::Xp: return EchoAxis::Xm;
        case EchoAxis::Xm: return EchoAxis::Xp;
    }
    return EchoAxis::Yp;
}

// Cardinal torque axis of a pulse azimuth, if it is one.
std::optional<EchoAxis> cardinal_axis(double phase) {
    const double w = wrap_angle(phase);
    constexpr double tol = 1e-9;
    if (std::abs(w) < tol) return EchoAxis::Xp;
    if (std::abs(std::abs(w) - kPi) < tol) return EchoAxis::Xm;
    if (std::abs(w - 0.5 * kPi) < tol) return EchoAxis::Yp;
    if (std::abs(w + 0.5 * kPi) < tol) return EchoAxis::Ym;
    return std::nullopt;
}

bool same_letter(EchoAxis a, EchoAxis b) {
    const bool ax = (a == EchoAxis::Xp || a == EchoAxis::Xm);
    const bool bx = (b == EchoAxis::Xp || b == EchoAxis::Xm);
    return ax == bx;
}

}  // namespace

void PulseSequence::validate() const {
    double t = -1e-15;
    double frame = 0.0;
    for (const SeqEvent& e : events) {
        if (e.t0 < t - 1e-12) throw std::runtime_error("PulseSequence: overlapping events");
        t = e.t0 + e.dur;
        if (e.kind == EventKind::FrameShift) frame += e.frame_shift;
        if (e.kind == EventKind::AddressingPulse && e.scene < 0)
            throw std::runtime_error("PulseSequence: addressing event without a scene");
        if (e.kind == EventKind::QubitPulse && std::abs(e.frame_phase - frame) > 1e-9)
            throw std::runtime_error("PulseSequence: frame ledger mismatch");
    }
    if (std::abs(frame - frame_ledger) > 1e-9)
        throw std::runtime_error("PulseSequence: frame ledger total mismatch");
}

std::string PulseSequence::dump_json() const {
    nlohmann::ordered_json j;
    j["total_time_us"] = total_time * 1e6;
    j["frame_ledger_rad"] = frame_ledger;
    auto& ev = j["events"];
    ev = nlohmann::ordered_json::array();
    for (const SeqEvent& e : events) {
        nlohmann::ordered_json o;
        o["t_us"] = std::round(e.t0 * 1e9) / 1e3;
        o["dur_us"] = std::round(e.dur * 1e9) / 1e3;
        switch (e.kind) {
            case EventKind::QubitPulse: o["kind"] = "qubit_pulse"; break;
            case EventKind::AddressingPulse: o["kind"] = "addressing_pulse"; break;
            case EventKind::Idle: o["kind"] = "idle"; break;
            case EventKind::FrameShift: o["kind"] = "frame_shift"; break;
        }
        switch (e.role) {
            case PulseRole::EchoPi: o["role"] = "echo_pi"; break;
            case PulseRole::CgHalfPi: o["role"] = "cg_half_pi"; break;
            case PulseRole::PgPulse: o["role"] = "pg"; break;
            case PulseRole::OpeningPulse: o["role"] = "opening"; break;
            case PulseRole::DetectionPulse: o["role"] = "detection"; break;
            case PulseRole::Addressing: o["role"] = "addressing"; break;
            case PulseRole::None: break;
        }
        if (e.kind == EventKind::QubitPulse || e.kind == EventKind::AddressingPulse) {
            o["amplitude_rad_s"] = e.pulse.peak_rabi;
            o["phase_rad"] = e.pulse.phase;
            o["detuning_rad_s"] = e.pulse.detuning;
            o["frame_rad"] = e.frame_phase;
        }
        if (e.kind == EventKind::FrameShift) o["shift_rad"] = e.frame_shift;
        if (e.scene >= 0) {
            o["scene"] = e.scene;
            o["light"] = {e.light0, e.light1};
        }
        if (e.gate >= 0) o["gate"] = e.gate;
        ev.push_back(std::move(o));
    }
    return j.dump(2);
}

int SceneSet::intern(std::vector<int> beam_ids, const LatticeConfig& lat, double k,
                     double leak_floor) {
    std::sort(beam_ids.begin(), beam_ids.end());
    beam_ids.erase(std::unique(beam_ids.begin(), beam_ids.end()), beam_ids.end());
    if (auto it = index_.find(beam_ids); it != index_.end()) return it->second;
    scenes.push_back(classify_stage(lat, beams, beam_ids, k, leak_floor));
    const int idx = static_cast<int>(scenes.size()) - 1;
    index_[beam_ids] = idx;
    return idx;
}

SequenceBuilder::SequenceBuilder(const LatticeConfig& lattice, CompilerConfig cfg)
    : lattice_(lattice), cfg_(std::move(cfg)) {
    if (cfg_.k <= 1.0) throw std::domain_error("SequenceBuilder: k must exceed 1");
    scenes_.cross_ratio_k = cfg_.k;
}

int SequenceBuilder::push_event(SeqEvent e) {
    e.t0 = t_;
    t_ += e.dur;
    if (e.kind == EventKind::QubitPulse || e.kind == EventKind::AddressingPulse) {
        e.frame_phase = frame_;
        e.shape = shape_id(e.pulse);
    }
    events_.push_back(std::move(e));
    return static_cast<int>(events_.size()) - 1;
}

int SequenceBuilder::shape_id(const Pulse& p) {
    for (std::size_t i = 0; i < shapes_.size(); ++i) {
        const PulseShape& s = shapes_[i];
        if (s.kind == p.kind && s.duration == p.duration && s.peak_rabi == p.peak_rabi &&
            s.detuning == p.detuning && s.envelope == p.envelope)
            return static_cast<int>(i);
    }
    shapes_.push_back({p.kind, p.duration, p.peak_rabi, p.detuning, p.envelope});
    return static_cast<int>(shapes_.size()) - 1;
}

int SequenceBuilder::add_global_pulse(double area, double phase, PulseRole role) {
    SeqEvent e;
    e.kind = EventKind::QubitPulse;
    e.role = role;
    e.dur = (role == PulseRole::EchoPi || role == PulseRole::PgPulse) ? cfg_.timing.t_pi
                                                                      : cfg_.timing.t_half;
    e.pulse.kind = PulseKind::QubitResonant;
    e.pulse.duration = e.dur;
    e.pulse.peak_rabi = std::abs(area) / (kBlackmanArea * e.dur);
    e.pulse.phase = area >= 0 ? phase : wrap_angle(phase + kPi);
    e.pulse.envelope = Envelope::Blackman;
    return push_event(e);
}

void SequenceBuilder::add_frame_shift(double xi) {
    SeqEvent e;
    e.kind = EventKind::FrameShift;
    e.frame_shift = xi;
    push_event(e);
    frame_ += xi;
}

void SequenceBuilder::add_idle(double duration) {
    SeqEvent e;
    e.kind = EventKind::Idle;
    e.dur = duration;
    push_event(e);
}

namespace {

struct GateKey {
    long long f, k, t, d, om, tol, th;
    bool operator<(const GateKey& o) const {
        return std::tie(f, k, t, d, om, tol, th) < std::tie(o.f, o.k, o.t, o.d, o.om, o.tol, o.th);
    }
};

GateKey make_gate_key(const CompilerConfig& cfg, double theta_mag) {
    return {llround(cfg.f_hz * 1e6),
            llround(cfg.k * 1e9),
            llround(cfg.timing.t_addr * 1e12),
            llround(cfg.delta_hz * 1e6),
            llround(cfg.omega_max * 1e6),
            llround(std::log10(cfg.integ.tol) * 1e3),
            llround(theta_mag * 1e12)};
}

std::mutex g_gate_cache_mu;
std::map<GateKey, ResolvedGate> g_gate_cache;

double worst_class_transfer(const PhaseGateParams& p, const IntegratorOpts& integ) {
    return std::max({addressing_transfer(p, 0.0, integ), addressing_transfer(p, p.f_hz, integ),
                     addressing_transfer(p, p.k * p.f_hz, integ)});
}

// Detuning on (f, kf) minimizing the worst-class per-pulse transfer at the
// amplitude realizing |theta|; the transfer nodes move with the drive
// amplitude, so this is resolved per gate angle.
double auto_detuning(const CompilerConfig& cfg, double theta_mag) {
    PhaseGateParams p;
    p.f_hz = cfg.f_hz;
    p.k = cfg.k;
    p.t_addr = cfg.timing.t_addr;
    const StageShifts sched = target_stage_shifts(p);
    const double span = (cfg.k - 1.0) * cfg.f_hz;
    if (theta_mag <= 0.0) return cfg.f_hz + 0.58 * span;
    const double ref_theta = theta_mag;
    double best_d = 0.0, best_m = 1e300;
    double om_guess = 0.0;
    for (double d = cfg.f_hz + 0.08 * span; d <= cfg.f_hz + 0.92 * span; d += span / 400.0) {
        p.delta_hz = d;
        try {
            if (om_guess == 0.0) {
                om_guess =
                    solve_omega_for_phase(p, sched, true, -ref_theta, cfg.omega_max, cfg.integ);
            } else {
                for (int it2 = 0; it2 < 2; ++it2) {
                    p.omega = om_guess;
                    const double ph = exact_gate_phase(p, sched, true, cfg.integ);
                    om_guess *= std::sqrt(ref_theta / std::abs(ph));
                }
            }
        } catch (const std::exception&) {
            om_guess = 0.0;
            continue;
        }
        p.omega = om_guess;
        const double worst = worst_class_transfer(p, cfg.integ);
        if (worst < best_m) {
            best_m = worst;
            best_d = d;
        }
    }
    if (best_d == 0.0) throw std::runtime_error("resolve_gate: no usable detuning on the branch");
    return best_d;
}

}  // namespace

ResolvedGate SequenceBuilder::resolve_gate(double theta_chunk) const {
    const double mag = std::abs(theta_chunk);
    const GateKey key = make_gate_key(cfg_, mag);
    {
        std::lock_guard<std::mutex> lk(g_gate_cache_mu);
        if (auto it = g_gate_cache.find(key); it != g_gate_cache.end()) {
            ResolvedGate rg = it->second;
            rg.pi_after = theta_chunk <= 0.0;
            return rg;
        }
    }

    ResolvedGate rg;
    if (cfg_.delta_hz > 0.0) {
        rg.delta_hz = cfg_.delta_hz;
    } else {
        rg.delta_hz = auto_detuning(cfg_, mag);
    }

    if (mag > 0.0) {
        PhaseGateParams p;
        p.f_hz = cfg_.f_hz;
        p.k = cfg_.k;
        p.t_addr = cfg_.timing.t_addr;
        p.delta_hz = rg.delta_hz;
        const StageShifts sched = target_stage_shifts(p);
        rg.omega = solve_omega_for_phase(p, sched, true, -mag, cfg_.omega_max, cfg_.integ);
        p.omega = rg.omega;
        rg.worst_transfer = worst_class_transfer(p, cfg_.integ);
        if (rg.worst_transfer > cfg_.transfer_budget)
            throw std::runtime_error("resolve_gate: off-resonant transfer bound violated");
    }
    {
        std::lock_guard<std::mutex> lk(g_gate_cache_mu);
        g_gate_cache.emplace(key, rg);
    }
    ResolvedGate out = rg;
    out.pi_after = theta_chunk <= 0.0;
    return out;
}

void SequenceBuilder::add_phase_gate_chunk(const std::array<Site, 2>& pair, double theta) {
    const ResolvedGate rg = resolve_gate(theta);

    auto beam_id = [&](BeamAxis axis, const Site& focus) {
        for (std::size_t i = 0; i < scenes_.beams.size(); ++i) {
            if (scenes_.beams[i].axis == axis && scenes_.beams[i].focus == focus)
                return static_cast<int>(i);
        }
        BeamSpec b;
        b.axis = axis;
        b.focus = focus;
        b.waist_um = cfg_.waist_um;
        b.rayleigh_um = cfg_.rayleigh_um;
        b.peak_shift_hz = cfg_.f_hz;
        scenes_.beams.push_back(b);
        return static_cast<int>(scenes_.beams.size()) - 1;
    };
    const int ax = beam_id(BeamAxis::X, pair[0]);
    const int ay = beam_id(BeamAxis::Y, pair[0]);
    const int bx = beam_id(BeamAxis::X, pair[1]);
    const int by = beam_id(BeamAxis::Y, pair[1]);

    std::array<int, 4> stage_scene;
    {
        const std::vector<std::vector<int>> stage_beams = {
            {ax, ay},
            cfg_.dummy_swap ? std::vector<int>{ay, by} : std::vector<int>{ax, bx},
            {bx, by},
            cfg_.dummy_swap ? std::vector<int>{ax, bx} : std::vector<int>{ay, by}};
        for (int s = 0; s < 4; ++s)
            stage_scene[s] = scenes_.intern(stage_beams[s], lattice_, cfg_.k, cfg_.leak_floor);
    }

    const int gate_id = static_cast<int>(gates_.size());
    const GateTiming& tm = cfg_.timing;
    Pulse addr;
    addr.kind = PulseKind::AddressingShift;
    addr.duration = tm.t_addr;
    addr.peak_rabi = addressing_peak_from_rms(rg.omega, Envelope::Blackman);
    addr.detuning = kTwoPi * rg.delta_hz;
    addr.envelope = Envelope::Blackman;

    for (int s = 0; s < 4; ++s) {
        if (!rg.pi_after) add_global_pulse(kPi, 0.5 * kPi, PulseRole::EchoPi);
        const int stage_id = static_cast<int>(stages_.size());
        stages_.push_back({stage_scene[s], tm.light_exposure()});
        auto light_event = [&](double dur, double l0, double l1) {
            SeqEvent e;
            e.kind = EventKind::Idle;
            e.dur = dur;
            e.scene = stage_scene[s];
            e.light0 = l0;
            e.light1 = l1;
            e.stage = stage_id;
            e.gate = gate_id;
            push_event(e);
        };
        light_event(tm.t_ramp, 0.0, 1.0);
        light_event(tm.t_settle, 1.0, 1.0);
        {
            SeqEvent e;
            e.kind = EventKind::AddressingPulse;
            e.role = PulseRole::Addressing;
            e.dur = tm.t_addr;
            e.pulse = addr;
            e.scene = stage_scene[s];
            e.light0 = e.light1 = 1.0;
            e.stage = stage_id;
            e.gate = gate_id;
            push_event(e);
        }
        light_event(tm.t_tail, 1.0, 1.0);
        light_event(tm.t_ramp, 1.0, 0.0);
        if (rg.pi_after) add_global_pulse(kPi, 0.5 * kPi, PulseRole::EchoPi);
    }
    GateIntent gi;
    gi.theta = theta;
    gi.anchor_event = static_cast<int>(events_.size()) - 1;
    gates_.push_back(gi);
}

void SequenceBuilder::add_target_rz(const std::vector<Site>& targets, double theta) {
    if (theta <= -kPi || theta > kPi + 1e-12)
        throw std::domain_error("add_target_rz: theta outside (-pi, pi]");
    if (targets.empty() || targets.size() > 2)
        throw std::domain_error("add_target_rz: need 1 or 2 target sites");
    for (const Site& s : targets)
        if (!lattice_.in_bounds(s)) throw std::domain_error("add_target_rz: target out of bounds");

    std::array<Site, 2> pair;
    pair[0] = targets[0];
    if (targets.size() == 2) {
        pair[1] = targets[1];
        if (pair[0] == pair[1]) throw std::domain_error("add_target_rz: identical targets");
        if (pair[0].z == pair[1].z && (pair[0].x == pair[1].x || pair[0].y == pair[1].y))
            throw std::runtime_error(
                "add_target_rz: same-plane targets sharing a beam line break echo cancellation");
    } else {
        // Virtual partner: a site in another plane, unoccupied when the
        // occupancy is known, never one already receiving a phase.
        const auto usable = [&](const Site& cand) {
            if (cand.z == pair[0].z) return false;
            if (!lattice_.occupancy.empty() && lattice_.occupancy[lattice_.index(cand)])
                return false;
            for (const Site& t : target_sites_)
                if (t == cand) return false;
            return true;
        };
        std::optional<Site> partner;
        for (int dz = 1; dz < lattice_.nz && !partner; ++dz) {
            const Site cand{pair[0].x, pair[0].y, (pair[0].z + dz) % lattice_.nz};
            if (usable(cand)) partner = cand;
        }
        for (int i = 0; i < lattice_.n_sites() && !partner; ++i) {
            const Site cand = lattice_.site_at(i);
            if (usable(cand)) partner = cand;
        }
        if (!partner)
            throw std::runtime_error("add_target_rz: no usable site for a virtual partner");
        pair[1] = *partner;
    }
    for (const Site& t : pair) {
        if (std::find(target_sites_.begin(), target_sites_.end(), t) == target_sites_.end())
            target_sites_.push_back(t);
    }

    const int chunks = std::max(1, static_cast<int>(std::ceil(std::abs(theta) / cfg_.theta_chunk)));
    const double sub = theta / chunks;
    for (int c = 0; c < chunks; ++c) add_phase_gate_chunk(pair, sub);
}

void SequenceBuilder::add_target_rotation(const std::array<double, 3>& axis, double theta,
                                          const std::vector<Site>& targets) {
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n == 0.0) throw std::domain_error("add_target_rotation: zero axis");
    const double nx = axis[0] / n, ny = axis[1] / n, nz = axis[2] / n;
    const double polar = std::acos(std::clamp(nz, -1.0, 1.0));
    const double azim = std::atan2(ny, nx);
    const double chi = azim - 0.5 * kPi;

    CgBlockInfo block;
    block.preceding_pg = last_pg_;
    const std::size_t first_new = events_.size();

    if (polar > 1e-12)
        block.opening_half_pi = add_global_pulse(polar, wrap_angle(chi + kPi), PulseRole::CgHalfPi);
    add_target_rz(targets, wrap_angle(theta));
    if (polar > 1e-12) add_global_pulse(polar, wrap_angle(chi), PulseRole::CgHalfPi);

    // The first four echo pulses added by the inner phase gate form a block
    // for the phase-cycling rules.
    int found = 0;
    for (std::size_t i = first_new; i < events_.size() && found < 4; ++i) {
        if (events_[i].role == PulseRole::EchoPi) block.echo_events[found++] = static_cast<int>(i);
    }
    if (found == 4) cg_blocks_.push_back(block);
}

void SequenceBuilder::add_pauli(PauliGate g) {
    switch (g) {
        case PauliGate::Xp: last_pg_ = add_global_pulse(kPi, 0.0, PulseRole::PgPulse); break;
        case PauliGate::Xm: last_pg_ = add_global_pulse(kPi, kPi, PulseRole::PgPulse); break;
        case PauliGate::Yp: last_pg_ = add_global_pulse(kPi, 0.5 * kPi, PulseRole::PgPulse); break;
        case PauliGate::Ym: last_pg_ = add_global_pulse(kPi, -0.5 * kPi, PulseRole::PgPulse); break;
        case PauliGate::Zp: add_frame_shift(kPi); break;
        case PauliGate::Zm: add_frame_shift(-kPi); break;
        case PauliGate::I: break;
    }
}

PulseSequence SequenceBuilder::take() {
    PulseSequence seq;
    seq.events = std::move(events_);
    seq.stages = std::move(stages_);
    seq.gates = std::move(gates_);
    seq.cg_blocks = std::move(cg_blocks_);
    seq.shapes = std::move(shapes_);
    seq.total_time = t_;
    seq.frame_ledger = frame_;
    seq.scene_ids.resize(scenes_.scenes.size());
    for (std::size_t i = 0; i < seq.scene_ids.size(); ++i) seq.scene_ids[i] = static_cast<int>(i);
    seq.validate();
    return seq;
}

void add_gate(SequenceBuilder& b, const GateSpec& g) {
    switch (g.kind) {
        case GateKind::TargetRz:
            b.add_target_rz(g.targets, g.angle);
            return;
        case GateKind::TargetRotation:
            b.add_target_rotation(g.axis, g.angle, g.targets);
            return;
        case GateKind::GlobalCG: {
            const double azim = std::atan2(g.axis[1], g.axis[0]);
            b.add_global_pulse(g.angle, azim, PulseRole::CgHalfPi);
            return;
        }
        case GateKind::PauliPG: {
            if (g.angle == 0.0) {
                b.add_pauli(PauliGate::I);
                return;
            }
            const bool plus = g.angle > 0.0;
            if (std::abs(g.axis[0]) > 0.5)
                b.add_pauli(plus == (g.axis[0] > 0) ? PauliGate::Xp : PauliGate::Xm);
            else if (std::abs(g.axis[1]) > 0.5)
                b.add_pauli(plus == (g.axis[1] > 0) ? PauliGate::Yp : PauliGate::Ym);
            else
                b.add_pauli(plus == (g.axis[2] > 0) ? PauliGate::Zp : PauliGate::Zm);
            return;
        }
        case GateKind::Detection:
            throw std::domain_error("add_gate: detection gates are synthesized from the ideal "
                                    "state via compile_detection");
    }
}

PulseSequence compile_rz(const LatticeConfig& lattice, const CompilerConfig& cfg,
                         const std::vector<Site>& targets, double theta, SceneSet* scenes_out) {
    SequenceBuilder b(lattice, cfg);
    b.add_target_rz(targets, theta);
    PulseSequence seq = apply_phase_cycling(b.take());
    if (scenes_out) *scenes_out = std::move(b.scenes());
    return seq;
}

PulseSequence compile_rotation(const LatticeConfig& lattice, const CompilerConfig& cfg,
                               const std::array<double, 3>& axis, double theta,
                               const std::vector<Site>& targets, SceneSet* scenes_out) {
    SequenceBuilder b(lattice, cfg);
    b.add_target_rotation(axis, theta, targets);
    PulseSequence seq = apply_phase_cycling(b.take());
    if (scenes_out) *scenes_out = std::move(b.scenes());
    return seq;
}

PulseSequence compile_pauli(const LatticeConfig& lattice, const CompilerConfig& cfg, PauliGate g) {
    SequenceBuilder b(lattice, cfg);
    b.add_pauli(g);
    return b.take();
}

EchoPhasePlan plan_echo_phases(const PulseSequence& seq) {
    EchoPhasePlan plan;
    std::vector<int> block_of(seq.events.size(), -1);
    std::vector<int> pos_in_block(seq.events.size(), -1);
    for (std::size_t bi = 0; bi < seq.cg_blocks.size(); ++bi) {
        for (int k = 0; k < 4; ++k) {
            const int e = seq.cg_blocks[bi].echo_events[k];
            if (e >= 0) {
                block_of[e] = static_cast<int>(bi);
                pos_in_block[e] = k;
            }
        }
    }
    int run_pos = 0;
    static constexpr EchoAxis kRun[4] = {EchoAxis::Yp, EchoAxis::Yp, EchoAxis::Ym, EchoAxis::Ym};
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        if (seq.events[i].role != PulseRole::EchoPi) continue;
        EchoAxis axis;
        if (block_of[i] < 0) {
            axis = kRun[run_pos % 4];
            ++run_pos;
        } else {
            const CgBlockInfo& blk = seq.cg_blocks[block_of[i]];
            EchoAxis first = EchoAxis::Yp;
            if (blk.opening_half_pi >= 0) {
                const SeqEvent& op = seq.events[blk.opening_half_pi];
                if (auto cg_axis = cardinal_axis(op.pulse.phase)) {
                    first = *cg_axis;
                    if (blk.preceding_pg >= 0) {
                        const SeqEvent& pg = seq.events[blk.preceding_pg];
                        if (auto pg_axis = cardinal_axis(pg.pulse.phase)) {
                            if (same_letter(*pg_axis, *cg_axis)) first = opposite(*pg_axis);
                        }
                    }
                }
            }
            switch (pos_in_block[i]) {
                case 0: axis = first; break;
                case 1: axis = EchoAxis::Yp; break;
                case 2: axis = EchoAxis::Ym; break;
                default: axis = opposite(first); break;
            }
            run_pos = 0;  // a CG interrupts the free-run cycle
        }
        plan.pulse_events.push_back(static_cast<int>(i));
        plan.axes.push_back(axis);
    }
    return plan;
}

PulseSequence apply_phase_cycling(PulseSequence seq) {
    const EchoPhasePlan plan = plan_echo_phases(seq);
    for (std::size_t k = 0; k < plan.pulse_events.size(); ++k)
        seq.events[plan.pulse_events[k]].pulse.phase = echo_axis_phase(plan.axes[k]);
    return seq;
}

Mat2 ideal_unitary(const PulseSequence& seq, AtomClass cls) {
    Mat2 u;
    std::vector<std::pair<int, double>> anchors;  // (event idx, theta)
    for (const GateIntent& g : seq.gates) anchors.emplace_back(g.anchor_event, g.theta);
    std::size_t next_anchor = 0;
    std::sort(anchors.begin(), anchors.end());
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const SeqEvent& e = seq.events[i];
        if (e.kind == EventKind::QubitPulse)
            u = rot_xy(e.pulse.area(), e.pulse.phase + e.frame_phase) * u;
        while (next_anchor < anchors.size() &&
               anchors[next_anchor].first == static_cast<int>(i)) {
            if (cls == AtomClass::Target) u = rot_z(anchors[next_anchor].second) * u;
            ++next_anchor;
        }
    }
    return rot_z(seq.frame_ledger) * u;
}

DetectionPlan compile_detection(const Mat2& ideal_so_far, double frame_ledger) {
    DetectionPlan plan;
    const Mat2 rel = rot_z(-frame_ledger) * ideal_so_far;
    const cplx a0 = rel.m01;  // rel * |1>
    const cplx a1 = rel.m11;
    const double p1 = std::norm(a1);
    const double p0 = std::norm(a0);
    constexpr double tol = 1e-9;
    if (p1 >= 1.0 - tol) {
        plan.kind = DetectionPlan::Kind::Identity;
        return plan;
    }
    if (p0 >= 1.0 - tol) {
        plan.kind = DetectionPlan::Kind::SinglePi;
        plan.phase1 = wrap_angle(-frame_ledger);
        return plan;
    }
    if (std::abs(p0 - p1) < 1e-9) {
        plan.kind = DetectionPlan::Kind::SingleHalfPi;
        const double chi_eff = std::arg(a0 / a1) - 0.5 * kPi;
        plan.phase1 = wrap_angle(chi_eff - frame_ledger);
        return plan;
    }
    // Generic state: free frame shift to zero the relative phase, then two
    // half-pi pulses.
    plan.kind = DetectionPlan::Kind::TwoPulse;
    plan.fallback = true;
    plan.frame_pre = wrap_angle(-std::arg(a1 / a0));
    const double ledger2 = frame_ledger + plan.frame_pre;
    plan.phase1 = wrap_angle(0.0 - ledger2);
    // State after Rz(frame_pre) and R(pi/2, 0):
    const Mat2 after = rot_xy(0.5 * kPi, 0.0) * rot_z(plan.frame_pre) * Mat2{a0, 0, a1, 0};
    const cplx b0 = after.m00, b1 = after.m10;
    const double chi2 = std::arg(b0 / b1) - 0.5 * kPi;
    plan.phase2 = wrap_angle(chi2 - ledger2);
    return plan;
}

void add_detection(SequenceBuilder& b, const DetectionPlan& plan) {
    switch (plan.kind) {
        case DetectionPlan::Kind::Identity: break;
        case DetectionPlan::Kind::SinglePi:
            b.add_global_pulse(kPi, plan.phase1, PulseRole::DetectionPulse);
            break;
        case DetectionPlan::Kind::SingleHalfPi:
            b.add_global_pulse(0.5 * kPi, plan.phase1, PulseRole::DetectionPulse);
            break;
        case DetectionPlan::Kind::TwoPulse:
            b.add_frame_shift(plan.frame_pre);
            b.add_global_pulse(0.5 * kPi, plan.phase1, PulseRole::DetectionPulse);
            b.add_global_pulse(0.5 * kPi, plan.phase2, PulseRole::DetectionPulse);
            break;
    }
}

}  // namespace latgate
