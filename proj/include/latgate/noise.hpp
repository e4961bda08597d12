#pragma once

#include <span>
#include <vector>

#include "latgate/dynamics.hpp"
#include "latgate/rng.hpp"

namespace latgate {

struct NoiseConfig {
    double amplitude_jitter_sigma = 3e-3;    // fractional, microwave Rabi, per shot
    double inhom_broadening_hz = 130.0;      // qubit-transition spread, per atom per shot
    double f_spread_sigma = 0.02;            // fractional ac Stark shift, per beam per shot
    double scattering_coeff = 3.1e-2;        // 1/(s kHz) of aux shift
    double t2_prime_s = 7.0;
    double spam_loss_collision = 0.03;
    double spam_transfer_error = 0.02;
    double spam_clearing_error = 0.005;
    // Keep the residual aux amplitude coherent between addressing stages.
    // Off by default: the aux level's phase is scrambled between stages by
    // field and light noise, so leakage accumulates as population.
    bool coherent_aux_leak = false;

    static NoiseConfig all_off() {
        NoiseConfig n;
        n.amplitude_jitter_sigma = 0.0;
        n.inhom_broadening_hz = 0.0;
        n.f_spread_sigma = 0.0;
        n.scattering_coeff = 0.0;
        n.t2_prime_s = 0.0;  // 0 disables dephasing
        n.spam_loss_collision = 0.0;
        n.spam_transfer_error = 0.0;
        n.spam_clearing_error = 0.0;
        return n;
    }
};

// One sampled draw of the slow (per-shot) noise parameters. Reproducible
// from (seed, tag, shot_index).
struct ShotRealization {
    double amplitude_factor = 1.0;
    std::vector<double> atom_detuning_hz;  // per atom
    std::vector<double> beam_f_factor;     // per registry beam
};

ShotRealization sample_shot(const NoiseConfig& cfg, int n_atoms, int n_beams,
                            std::uint64_t seed, std::uint64_t shot_index,
                            std::uint64_t tag = 0);

// p = Gamma_sc * shift[kHz] * duration, clipped to [0, 1].
double scattering_probability(double aux_shift_khz, double duration_s, const NoiseConfig& cfg);

// exp(-elapsed / T2'), the surviving coherence fraction. T2' <= 0 => 1.
double t2_decay_factor(double elapsed_s, const NoiseConfig& cfg);

// Sample the measured outcome of one atom: SPAM chain on top of the
// projective qubit readout.  bright == counted as |1>.
bool measure_bright(const AtomState& s, const NoiseConfig& cfg, Rng& rng);

// Expectation of measure_bright over the readout channel (projection, SPAM
// and depolarized-readout coins); deterministic given the atom state, so
// noise-free experiments reduce exactly to their analytic values.
double measured_bright_probability(const AtomState& s, const NoiseConfig& cfg);

// Fringe population bounds implied by the SPAM parameters: the measured
// fraction for a perfect |1> (|0>) ensemble.
struct SpamBounds {
    double max_pop = 1.0;
    double min_pop = 0.0;
};
SpamBounds spam_bounds(const NoiseConfig& cfg);

// Spec-level SPAM operation: ideal per-atom P(|1>) values -> measured counts.
struct MeasuredCounts {
    int bright = 0;
    int total = 0;
    double fraction() const { return total ? static_cast<double>(bright) / total : 0.0; }
};
MeasuredCounts apply_spam(std::span<const double> ideal_p1, const NoiseConfig& cfg, Rng& rng);

}  // namespace latgate
