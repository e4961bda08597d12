#include "latgate/dynamics.hpp"

#include <stdexcept>
#include <vector>

namespace latgate {

namespace {

// Gauss-Legendre nodes and the CFM4 exponent weights.
constexpr double kNode1 = 0.5 - 0.28867513459481287;  // 1/2 - sqrt(3)/6
constexpr double kNode2 = 0.5 + 0.28867513459481287;
constexpr double kWPlus = 0.25 + 0.28867513459481287;  // 1/4 + sqrt(3)/6
constexpr double kWMinus = 0.25 - 0.28867513459481287;

Mat2 cfm4_pass(double duration, double peak_rabi, Envelope env, double lower_diag, int n) {
    const double h = duration / n;
    Mat2 u;
    for (int k = 0; k < n; ++k) {
        const double t = k * h;
        double w1 = peak_rabi, w2 = peak_rabi;
        if (env == Envelope::Blackman) {
            w1 *= blackman_amplitude(t + kNode1 * h, duration);
            w2 *= blackman_amplitude(t + kNode2 * h, duration);
        }
        // exp(-i h (a H1 + b H2)) with H_j = [[0, w_j/2],[w_j/2, L]], a+b = 1/2.
        const double wa = kWPlus * w1 + kWMinus * w2;
        const double wb = kWMinus * w1 + kWPlus * w2;
        const Mat2 e1 = exp_pauli(0.25 * lower_diag, 0.5 * wa, 0.0, -0.25 * lower_diag, h);
        const Mat2 e2 = exp_pauli(0.25 * lower_diag, 0.5 * wb, 0.0, -0.25 * lower_diag, h);
        u = (e2 * e1) * u;
    }
    return u;
}

}  // namespace

Mat2 coupled_propagator(double duration, double peak_rabi, Envelope env, double lower_diag,
                        const IntegratorOpts& opts) {
    if (duration <= 0.0) throw std::domain_error("coupled_propagator: non-positive duration");
    if (peak_rabi < 0.0) throw std::domain_error("coupled_propagator: negative Rabi");
    // Constant Hamiltonian: single exact exponential.
    if (env == Envelope::Rectangular || peak_rabi == 0.0) {
        return exp_pauli(0.5 * lower_diag, 0.5 * peak_rabi *
                             (env == Envelope::Rectangular ? 1.0 : 0.0),
                         0.0, -0.5 * lower_diag, duration);
    }
    Mat2 prev = cfm4_pass(duration, peak_rabi, env, lower_diag, opts.n0);
    for (int n = 2 * opts.n0; n <= opts.n_max; n *= 2) {
        Mat2 cur = cfm4_pass(duration, peak_rabi, env, lower_diag, n);
        if (cur.max_abs_diff(prev) < opts.tol) return cur;
        prev = cur;
    }
    throw std::runtime_error("coupled_propagator: step doubling did not converge");
}

Mat2 with_drive_phase(const Mat2& u0, double chi) {
    if (chi == 0.0) return u0;
    const cplx w = std::polar(1.0, -chi);
    return {u0.m00, u0.m01 * std::conj(w), u0.m10 * w, u0.m11};
}

Mat3 pulse_propagator(const Pulse& pulse, double aux_detuning, double frame_phase,
                      const IntegratorOpts& opts) {
    if (pulse.kind == PulseKind::QubitResonant) {
        const Mat2 u0 = coupled_propagator(pulse.duration, pulse.peak_rabi, pulse.envelope,
                                           -pulse.detuning, opts);
        const Mat2 u = with_drive_phase(u0, pulse.phase + frame_phase);
        Mat3 r = Mat3::embed(u, 0, 1);
        // Return to the bare frame for a detuned drive.
        const cplx back = std::polar(1.0, -pulse.detuning * pulse.duration);
        r.at(1, 0) *= back;
        r.at(1, 1) *= back;
        return r;
    }
    const Mat2 u0 =
        coupled_propagator(pulse.duration, pulse.peak_rabi, pulse.envelope, -aux_detuning, opts);
    const Mat2 u = with_drive_phase(u0, pulse.phase);
    Mat3 r = Mat3::embed(u, 0, 2);
    const cplx back = std::polar(1.0, -pulse.detuning * pulse.duration);
    r.at(2, 0) *= back;
    r.at(2, 2) *= back;
    return r;
}

AtomState evolve(const AtomState& state, const Pulse& pulse, double aux_detuning,
                 double frame_phase, const IntegratorOpts& opts) {
    if (!state.lost && std::abs(state.norm_sq() - 1.0) > 1e-8)
        throw std::domain_error("evolve: state not normalized");
    AtomState out = state;
    out.apply(pulse_propagator(pulse, aux_detuning, frame_phase, opts));
    return out;
}

double differential_phase(const AtomState& before, const AtomState& after) {
    constexpr double eps = 1e-300;
    if (std::abs(before.a0) < eps || std::abs(before.a1) < eps || std::abs(after.a0) < eps ||
        std::abs(after.a1) < eps)
        throw std::domain_error("differential_phase: undefined phase (zero amplitude)");
    const double b = std::arg(before.a1 / before.a0);
    const double a = std::arg(after.a1 / after.a0);
    return wrap_angle(a - b);
}

}  // namespace latgate
