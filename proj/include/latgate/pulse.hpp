#pragma once

#include "latgate/common.hpp"

namespace latgate {

enum class PulseKind { QubitResonant, AddressingShift };
enum class Envelope { Blackman, Rectangular };

// Blackman coefficients, normalized so the midpoint value is 1.
inline constexpr double kBlackmanA0 = 0.42;
inline constexpr double kBlackmanA1 = 0.50;
inline constexpr double kBlackmanA2 = 0.08;

// Fraction of peak Rabi delivered by the envelope: integral of env(t) over
// [0,T] is kBlackmanA0 * T (the cosine terms integrate to zero exactly).
inline constexpr double kBlackmanArea = kBlackmanA0;

// Integral of env^2 over [0,T] divided by T; sets the effective Omega^2 T of
// a shaped pulse (a0^2 + a1^2/2 + a2^2/2).
inline constexpr double kBlackmanSqArea =
    kBlackmanA0 * kBlackmanA0 + 0.5 * kBlackmanA1 * kBlackmanA1 + 0.5 * kBlackmanA2 * kBlackmanA2;

double blackman_amplitude(double t, double total);

// Peak Rabi frequency (rad/s) giving pulse area pi for a Blackman pulse of
// duration t_pi: integral Omega_p * env = pi  =>  Omega_p = pi / (0.42 T).
double pi_pulse_peak_rabi(double t_pi);

struct Pulse {
    PulseKind kind = PulseKind::QubitResonant;
    double duration = 0.0;   // s
    double peak_rabi = 0.0;  // rad/s
    double phase = 0.0;      // rad, frame-relative azimuth
    double detuning = 0.0;   // rad/s; qubit drive detuning or addressing detuning
                             // from the unshifted aux resonance
    Envelope envelope = Envelope::Blackman;

    double envelope_value(double t) const;
    double area() const;
};

}  // namespace latgate
