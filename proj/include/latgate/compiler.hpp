#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "latgate/lattice.hpp"
#include "latgate/phase_model.hpp"

namespace latgate {

enum class GateKind { TargetRz, TargetRotation, GlobalCG, PauliPG, Detection };

enum class PauliGate { Xp, Xm, Yp, Ym, Zp, Zm, I };

struct GateSpec {
    GateKind kind = GateKind::TargetRz;
    std::array<double, 3> axis{0, 0, 1};
    double angle = 0.0;
    std::vector<Site> targets;
};

enum class EventKind { QubitPulse, AddressingPulse, Idle, FrameShift };
enum class PulseRole { None, EchoPi, CgHalfPi, PgPulse, OpeningPulse, DetectionPulse, Addressing };

struct SeqEvent {
    EventKind kind = EventKind::Idle;
    PulseRole role = PulseRole::None;
    double t0 = 0.0, dur = 0.0;
    Pulse pulse;              // pulse events only; pulse.phase = programmed azimuth
    double frame_phase = 0.0; // cumulative frame phase folded into this event
    double frame_shift = 0.0; // FrameShift events only
    int scene = -1;           // scene index while this event runs (-1 = light off)
    double light0 = 0.0, light1 = 0.0;  // linear light scale across the event
    int stage = -1;           // stage-window index
    int gate = -1;            // phase-gate id
    int shape = -1;           // dedup id of (kind, dur, peak, envelope, detuning)
};

struct StageWindow {
    int scene = -1;
    double light_exposure_s = 0.0;  // integral of the light scale over the window
};

// Intended per-class action of one compiled phase gate (for ideal_unitary).
struct GateIntent {
    double theta = 0.0;   // target-class Rz angle carried by this gate
    int anchor_event = -1;
};

// One CG block's structure, for phase cycling.
struct CgBlockInfo {
    std::array<int, 4> echo_events{-1, -1, -1, -1};
    int opening_half_pi = -1;   // event index of the leading pi/2 (-1 if bare Rz)
    int preceding_pg = -1;      // event index of the PG pulse before this block
};

struct PulseShape {
    PulseKind kind;
    double duration, peak_rabi, detuning;
    Envelope envelope;
};

struct PulseSequence {
    std::vector<SeqEvent> events;
    std::vector<StageWindow> stages;
    std::vector<GateIntent> gates;
    std::vector<CgBlockInfo> cg_blocks;
    std::vector<PulseShape> shapes;
    std::vector<int> scene_ids;       // scenes referenced (indices into the SceneSet)
    double total_time = 0.0;
    double frame_ledger = 0.0;

    void validate() const;
    std::string dump_json() const;
};

// Torque-axis assignment for echo pi pulses.
enum class EchoAxis : std::uint8_t { Yp, Ym, Xp, Xm };
double echo_axis_phase(EchoAxis a);

struct EchoPhasePlan {
    std::vector<int> pulse_events;  // event index of each echo pi, in order
    std::vector<EchoAxis> axes;
};

struct GateTiming {
    double t_addr = 120e-6;
    double t_pi = 80e-6;
    double t_half = 80e-6;
    double t_ramp = 50e-6;
    double t_settle = 70e-6;
    double t_tail = 12e-6;
    double light_exposure() const { return t_ramp + t_settle + t_addr + t_tail; }
};

struct CompilerConfig {
    double f_hz = 51.2e3;
    double k = 1.8;
    double waist_um = 2.7;
    double rayleigh_um = 26.0;
    double delta_hz = 0.0;        // <= 0: choose per gate by transfer minimax
    double omega_max = kTwoPi * 25e3;
    double transfer_budget = 2e-3;  // compile error above this per-pulse worst-class transfer
    double leak_floor = 1e-2;       // drop sub-threshold beam intensities from shifts
    double theta_chunk = 0.5 * kPi * (1.0 + 1e-9);
    GateTiming timing;
    bool dummy_swap = false;  // swap which single beam is on in stages 2 vs 4
    IntegratorOpts integ;
};

// Scenes and the beam registry shared by a compiled program.
struct SceneSet {
    std::vector<BeamSpec> beams;
    std::vector<StageScene> scenes;
    double cross_ratio_k = 1.8;

    // Classify and register the scene for a beam-id list (deduplicated).
    int intern(std::vector<int> beam_ids, const LatticeConfig& lat, double k,
               double leak_floor = 1e-2);

  private:
    std::map<std::vector<int>, int> index_;
};

struct ResolvedGate {
    double delta_hz = 0.0;
    double omega = 0.0;           // envelope-RMS
    double worst_transfer = 0.0;
    bool pi_after = true;
};

class SequenceBuilder {
  public:
    SequenceBuilder(const LatticeConfig& lattice, CompilerConfig cfg);

    const CompilerConfig& config() const { return cfg_; }
    const LatticeConfig& lattice() const { return lattice_; }
    SceneSet& scenes() { return scenes_; }
    const SceneSet& scenes() const { return scenes_; }

    // Global resonant Blackman pulse of the given area at programmed azimuth.
    int add_global_pulse(double area, double phase, PulseRole role);
    void add_frame_shift(double xi);
    void add_idle(double duration);

    // Four-stage targeted phase gate(s); |theta| > theta_chunk splits into
    // equal chunks.  A single target gets a virtual partner site.
    void add_target_rz(const std::vector<Site>& targets, double theta);
    // V Rz(theta) V^dag with V a global pulse: net R_axis(theta) on targets.
    void add_target_rotation(const std::array<double, 3>& axis, double theta,
                             const std::vector<Site>& targets);
    void add_pauli(PauliGate g);

    double frame_ledger() const { return frame_; }
    // Every site that receives the targeted phase, including virtual
    // partners of odd gates.
    const std::vector<Site>& target_sites() const { return target_sites_; }
    PulseSequence take();

    // Resolve (delta, omega) for one phase-gate chunk; cached per |theta|.
    ResolvedGate resolve_gate(double theta_chunk) const;

  private:
    void add_phase_gate_chunk(const std::array<Site, 2>& pair, double theta);
    int push_event(SeqEvent e);
    int shape_id(const Pulse& p);

    LatticeConfig lattice_;
    CompilerConfig cfg_;
    SceneSet scenes_;
    std::vector<SeqEvent> events_;
    std::vector<StageWindow> stages_;
    std::vector<GateIntent> gates_;
    std::vector<CgBlockInfo> cg_blocks_;
    std::vector<PulseShape> shapes_;
    double t_ = 0.0;
    double frame_ = 0.0;
    int last_pg_ = -1;
    std::vector<Site> target_sites_;
};

// ---- Spec-level compile entry points -----------------------------------

// Append one abstract gate to a builder. TargetRz/TargetRotation take 1 or 2
// target sites; GlobalCG is a global rotation about the given equatorial
// axis; PauliPG maps axis/angle onto {Rx,Ry,Rz}(+-pi) or I; Detection needs
// the running ideal state and is synthesized via compile_detection.
void add_gate(SequenceBuilder& b, const GateSpec& g);

PulseSequence compile_rz(const LatticeConfig& lattice, const CompilerConfig& cfg,
                         const std::vector<Site>& targets, double theta, SceneSet* scenes_out);
PulseSequence compile_rotation(const LatticeConfig& lattice, const CompilerConfig& cfg,
                               const std::array<double, 3>& axis, double theta,
                               const std::vector<Site>& targets, SceneSet* scenes_out);
PulseSequence compile_pauli(const LatticeConfig& lattice, const CompilerConfig& cfg, PauliGate g);

// ---- Phase cycling ------------------------------------------------------

// Assign torque axes to every echo pi pulse: uninterrupted runs cycle
// {y,y,-y,-y}; inside a CG the first pi follows the interruption rule
// against the preceding PG and the block completes as {a, y, -y, -a}.
EchoPhasePlan plan_echo_phases(const PulseSequence& seq);
PulseSequence apply_phase_cycling(PulseSequence seq);

// ---- Ideal-unitary verification ----------------------------------------

enum class AtomClass : std::uint8_t { Target, Line, Spectator };

// Intended qubit-subspace action: qubit pulses as exact rotations, compiled
// phase gates as exact Rz(theta) for the target class (identity otherwise),
// frame shifts as Rz.
Mat2 ideal_unitary(const PulseSequence& seq, AtomClass cls);

// ---- Detection ----------------------------------------------------------

struct DetectionPlan {
    enum class Kind { Identity, SinglePi, SingleHalfPi, TwoPulse } kind = Kind::Identity;
    double frame_pre = 0.0;     // frame shift before the pulses (TwoPulse only)
    double phase1 = 0.0;        // programmed azimuth of the first pulse
    double phase2 = 0.0;        // second pulse (SinglePi composition / TwoPulse)
    bool fallback = false;
};

// Global rotation(s) returning the ideal state of `cls` to |1>, given the
// ideal unitary so far and the current frame ledger.
DetectionPlan compile_detection(const Mat2& ideal_so_far, double frame_ledger);
void add_detection(SequenceBuilder& b, const DetectionPlan& plan);

}  // namespace latgate
