#pragma once

#include "latgate/common.hpp"
#include "latgate/pulse.hpp"

namespace latgate {

// Three-level amplitudes in the bare rotating frame: |0>, |1>, |aux>.
struct AtomState {
    cplx a0{0.0, 0.0};
    cplx a1{0.0, 0.0};
    cplx aux{0.0, 0.0};
    double leak = 0.0;  // population dephased out of the coherent aux amplitude
    bool lost = false;
    bool decohered = false;

    static AtomState zero_state() { return {{1, 0}, {0, 0}, {0, 0}}; }
    static AtomState one_state() { return {{0, 0}, {1, 0}, {0, 0}}; }
    static AtomState equator_state() {
        const double r = 1.0 / std::sqrt(2.0);
        return {{r, 0}, {r, 0}, {0, 0}};
    }

    double norm_sq() const { return std::norm(a0) + std::norm(a1) + std::norm(aux) + leak; }
    double p1() const { return std::norm(a1); }
    double p_aux() const { return std::norm(aux) + leak; }

    void apply(const Mat3& u) {
        const cplx b0 = u.at(0, 0) * a0 + u.at(0, 1) * a1 + u.at(0, 2) * aux;
        const cplx b1 = u.at(1, 0) * a0 + u.at(1, 1) * a1 + u.at(1, 2) * aux;
        const cplx b2 = u.at(2, 0) * a0 + u.at(2, 1) * a1 + u.at(2, 2) * aux;
        a0 = b0;
        a1 = b1;
        aux = b2;
    }
};

struct IntegratorOpts {
    double tol = 1e-10;  // max amplitude change between step-halved solutions
    int n0 = 8;          // initial step count
    int n_max = 1 << 22;
};

// Propagator of H(t) = [[0, w(t)/2], [w(t)/2, lower_diag]] over [0, T], where
// w(t) = peak_rabi * envelope(t).  Commutator-free 4th-order Magnus steps
// (exact 2x2 exponentials, unitary by construction), step count doubled until
// two successive refinements agree within opts.tol.
Mat2 coupled_propagator(double duration, double peak_rabi, Envelope env, double lower_diag,
                        const IntegratorOpts& opts = {});

// Same propagator with the drive phase chi applied:
// U(chi) = W U(0) W^dag, W = diag(1, e^{-i chi}).
Mat2 with_drive_phase(const Mat2& u0, double chi);

// Bare-frame 3x3 propagator of a single pulse for an atom with the given
// aux-level detuning (rad/s, drive minus shifted resonance).  QubitResonant
// couples |0>-|1> at azimuth pulse.phase + frame_phase; AddressingShift
// couples |0>-|aux| at aux_detuning.  Includes the end-of-pulse frame factors
// that return amplitudes to the bare frame.
Mat3 pulse_propagator(const Pulse& pulse, double aux_detuning, double frame_phase,
                      const IntegratorOpts& opts = {});

// Advance a normalized state through one pulse.
AtomState evolve(const AtomState& state, const Pulse& pulse, double aux_detuning,
                 double frame_phase, const IntegratorOpts& opts = {});

// arg(after.a1/after.a0) - arg(before.a1/before.a0), wrapped to (-pi, pi].
double differential_phase(const AtomState& before, const AtomState& after);

}  // namespace latgate
