#include "latgate/phase_model.hpp"

#include <stdexcept>

namespace latgate {

void PhaseGateParams::validate() const {
    if (k <= 1.0) throw std::domain_error("PhaseGateParams: k must exceed 1");
    if (f_hz <= 0.0) throw std::domain_error("PhaseGateParams: f must be positive");
    if (t_addr <= 0.0) throw std::domain_error("PhaseGateParams: non-positive duration");
    if (omega < 0.0) throw std::domain_error("PhaseGateParams: negative Rabi");
}

double addressing_peak_from_rms(double omega_rms, Envelope env) {
    return env == Envelope::Blackman ? omega_rms / std::sqrt(kBlackmanSqArea) : omega_rms;
}

double eq1_phase(const PhaseGateParams& p) {
    p.validate();
    const double d = kTwoPi * p.delta_hz;
    const double f = kTwoPi * p.f_hz;
    const double kf = p.k * f;
    if (d == 0.0 || d == f || d == kf)
        throw std::domain_error("eq1_phase: detuning at a pole");
    const double bracket = 1.0 / (d - kf) - 2.0 / (d - f) + 1.0 / d;
    return 0.25 * p.omega * p.omega * p.t_addr * bracket;
}

double eq1_phase_ddelta(const PhaseGateParams& p) {
    const double d = kTwoPi * p.delta_hz;
    const double f = kTwoPi * p.f_hz;
    const double kf = p.k * f;
    const double db = -1.0 / ((d - kf) * (d - kf)) + 2.0 / ((d - f) * (d - f)) - 1.0 / (d * d);
    return 0.25 * p.omega * p.omega * p.t_addr * db * kTwoPi;  // per Hz of delta
}

StageShifts target_stage_shifts(const PhaseGateParams& p) {
    return {p.k * p.f_hz, p.f_hz, 0.0, p.f_hz};
}

namespace {

double stage_phase(const PhaseGateParams& p, double shift_hz, const IntegratorOpts& opts) {
    Pulse pulse;
    pulse.kind = PulseKind::AddressingShift;
    pulse.duration = p.t_addr;
    pulse.peak_rabi = addressing_peak_from_rms(p.omega, Envelope::Blackman);
    pulse.detuning = kTwoPi * p.delta_hz;
    pulse.envelope = Envelope::Blackman;
    const double aux_det = kTwoPi * (p.delta_hz - shift_hz);
    const AtomState before = AtomState::equator_state();
    const AtomState after = evolve(before, pulse, aux_det, 0.0, opts);
    return differential_phase(before, after);
}

}  // namespace

double exact_gate_phase(const PhaseGateParams& p, const StageShifts& shifts_hz, bool pi_after,
                        const IntegratorOpts& opts) {
    p.validate();
    if (p.omega == 0.0) return 0.0;
    double net = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double sign = ((i % 2 == 0) == pi_after) ? +1.0 : -1.0;
        net += sign * stage_phase(p, shifts_hz[i], opts);
    }
    return net;
}

double addressing_transfer(const PhaseGateParams& p, double shift_hz,
                           const IntegratorOpts& opts) {
    Pulse pulse;
    pulse.kind = PulseKind::AddressingShift;
    pulse.duration = p.t_addr;
    pulse.peak_rabi = addressing_peak_from_rms(p.omega, Envelope::Blackman);
    pulse.detuning = kTwoPi * p.delta_hz;
    pulse.envelope = Envelope::Blackman;
    const double aux_det = kTwoPi * (p.delta_hz - shift_hz);
    const AtomState after = evolve(AtomState::zero_state(), pulse, aux_det, 0.0, opts);
    return after.p_aux();
}

OperatingPoint operating_point(double f_hz, double k, double omega, double t_addr,
                               const IntegratorOpts& opts) {
    if (k <= 1.0) throw std::domain_error("operating_point: k must exceed 1");
    PhaseGateParams p;
    p.f_hz = f_hz;
    p.k = k;
    p.omega = omega;
    p.t_addr = t_addr;

    const auto abs_phase = [&](double delta_hz) {
        p.delta_hz = delta_hz;
        return std::abs(exact_gate_phase(p, target_stage_shifts(p), true, opts));
    };

    // Golden-section minimization of |phase| on the interior of (f, kf).
    const double span = (k - 1.0) * f_hz;
    double a = f_hz + 0.08 * span;
    double b = f_hz + 0.92 * span;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = abs_phase(x1), f2 = abs_phase(x2);
    for (int it = 0; it < 90 && (b - a) > 1e-6 * f_hz; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = abs_phase(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = abs_phase(x2);
        }
    }
    OperatingPoint op;
    op.delta_star_hz = 0.5 * (a + b);
    const double lo = f_hz + 0.081 * span, hi = f_hz + 0.919 * span;
    if (op.delta_star_hz < lo || op.delta_star_hz > hi)
        throw std::runtime_error("operating_point: no interior extremum in bracket");

    p.delta_hz = op.delta_star_hz;
    op.phase_at_star = exact_gate_phase(p, target_stage_shifts(p), true, opts);

    // Quadratic coefficient of the phase under common scaling of f (and kf)
    // at fixed delta: central second difference.
    const double h = 0.01;
    const auto phase_at_scale = [&](double scale) {
        PhaseGateParams q = p;
        q.f_hz = f_hz * scale;
        StageShifts s = {q.k * q.f_hz, q.f_hz, 0.0, q.f_hz};
        return exact_gate_phase(q, s, true, opts);
    };
    const double p0 = op.phase_at_star;
    const double pp = phase_at_scale(1.0 + h);
    const double pm = phase_at_scale(1.0 - h);
    op.curvature = std::abs(pp - 2.0 * p0 + pm) / (2.0 * h * h);
    return op;
}

double solve_omega_for_phase(const PhaseGateParams& base, const StageShifts& shifts_hz,
                             bool pi_after, double target_phase, double omega_max,
                             const IntegratorOpts& opts) {
    if (target_phase == 0.0) return 0.0;
    PhaseGateParams p = base;
    const auto phase_at = [&](double omega) {
        p.omega = omega;
        return exact_gate_phase(p, shifts_hz, pi_after, opts);
    };
    // Grow the bracket from a perturbative probe; per-stage phases stay
    // unwrapped as long as |phase| <= |target| <= pi.
    double lo = 0.0;
    double hi = omega_max / 64.0;
    double ph = phase_at(hi);
    if (ph * target_phase < 0.0)
        throw std::runtime_error("solve_omega_for_phase: target sign unreachable by schedule");
    while (std::abs(ph) < std::abs(target_phase)) {
        if (hi >= omega_max)
            throw std::runtime_error("solve_omega_for_phase: target magnitude unreachable");
        lo = hi;
        hi = std::min(omega_max, hi * 1.3);
        ph = phase_at(hi);
        if (ph * target_phase < 0.0)
            throw std::runtime_error("solve_omega_for_phase: phase wrapped inside bracket");
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * omega_max; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std::abs(phase_at(mid)) < std::abs(target_phase))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double phase_error_to_fidelity(double dphi) {
    if (std::abs(dphi) >= kPi) throw std::domain_error("phase_error_to_fidelity: |dphi| >= pi");
    const double s = std::sin(0.5 * dphi);
    return s * s;
}

}  // namespace latgate
