#pragma once

#include <array>

#include "latgate/dynamics.hpp"

namespace latgate {

// Parameters of the targeted phase gate.  omega is the envelope-RMS Rabi of
// the addressing microwave (sqrt of the time-averaged Omega^2), so that
// omega^2 * T matches the perturbative formula; the peak of a Blackman pulse
// is omega / sqrt(kBlackmanSqArea).
struct PhaseGateParams {
    double f_hz = 51.2e3;     // line-atom ac Stark shift
    double k = 1.8;           // cross shift in units of f
    double delta_hz = 74.9e3; // addressing detuning from the unshifted resonance
    double omega = 0.0;       // rad/s, envelope-RMS addressing Rabi
    double t_addr = 120e-6;   // s, addressing pulse duration

    void validate() const;
};

double addressing_peak_from_rms(double omega_rms, Envelope env);

// Perturbative net target phase, Eq.-style:
//   C * omega^2 * T * [1/(d-kf) - 2/(d-f) + 1/d],  C = 1/4,
// with all frequencies angular.  The published relation omits the constant;
// exact results come from exact_gate_phase, never from this.
double eq1_phase(const PhaseGateParams& p);

// Derivative dphi/ddelta of eq1_phase (analytic), used by tests and the
// perturbative operating-point oracle.
double eq1_phase_ddelta(const PhaseGateParams& p);

// Per-stage aux shifts seen by one atom over the four stages (Hz).
using StageShifts = std::array<double, 4>;

// Canonical target schedule: cross, line, spectator, line.
StageShifts target_stage_shifts(const PhaseGateParams& p);

// Exact net differential phase accumulated over a 4-stage gate by an atom
// whose per-stage shifts are given.  Echo bookkeeping: signs (+,-,+,-) when
// the echo pi follows each stage (pi_after), (-,+,-,+) when it precedes.
// Unwrapped (per-stage phases summed with signs).
double exact_gate_phase(const PhaseGateParams& p, const StageShifts& shifts_hz, bool pi_after,
                        const IntegratorOpts& opts = {});

// Residual aux population of one addressing pulse at the given shift.
double addressing_transfer(const PhaseGateParams& p, double shift_hz,
                           const IntegratorOpts& opts = {});

struct OperatingPoint {
    double delta_star_hz = 0.0;
    double phase_at_star = 0.0;  // rad, exact, canonical schedule, pi_after
    double curvature = 0.0;      // rad per (df/f)^2, quadratic coefficient under f scaling
};

// Extremum of the exact target phase on the branch delta in (f, kf):
// bracketed 1D minimization of |phase|.  Throws if no interior extremum.
OperatingPoint operating_point(double f_hz, double k, double omega, double t_addr,
                               const IntegratorOpts& opts = {});

// Rabi (envelope-RMS, rad/s) such that the exact gate phase equals
// target_phase; bisection on [0, omega_max].  target_phase must have the
// sign reachable by the schedule (checked by caller).
double solve_omega_for_phase(const PhaseGateParams& base, const StageShifts& shifts_hz,
                             bool pi_after, double target_phase, double omega_max,
                             const IntegratorOpts& opts = {});

// Gate error of a pure phase offset: sin^2(dphi/2).
double phase_error_to_fidelity(double dphi);

}  // namespace latgate
