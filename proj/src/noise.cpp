#include "latgate/noise.hpp"

#include <algorithm>
#include <cmath>

namespace latgate {

ShotRealization sample_shot(const NoiseConfig& cfg, int n_atoms, int n_beams,
                            std::uint64_t seed, std::uint64_t shot_index, std::uint64_t tag) {
    ShotRealization r;
    Rng rng(seed, tag, shot_index, 0xA11CE5);
    r.amplitude_factor =
        cfg.amplitude_jitter_sigma > 0 ? rng.normal(1.0, cfg.amplitude_jitter_sigma) : 1.0;
    r.atom_detuning_hz.resize(n_atoms, 0.0);
    if (cfg.inhom_broadening_hz > 0)
        for (auto& d : r.atom_detuning_hz) d = rng.normal(0.0, cfg.inhom_broadening_hz);
    r.beam_f_factor.resize(n_beams, 1.0);
    if (cfg.f_spread_sigma > 0)
        for (auto& b : r.beam_f_factor) b = rng.normal(1.0, cfg.f_spread_sigma);
    return r;
}

double scattering_probability(double aux_shift_khz, double duration_s, const NoiseConfig& cfg) {
    if (aux_shift_khz < 0.0) aux_shift_khz = 0.0;
    return std::clamp(cfg.scattering_coeff * aux_shift_khz * duration_s, 0.0, 1.0);
}

double t2_decay_factor(double elapsed_s, const NoiseConfig& cfg) {
    if (elapsed_s < 0.0) throw std::domain_error("t2_decay_factor: negative time");
    if (cfg.t2_prime_s <= 0.0) return 1.0;
    return std::exp(-elapsed_s / cfg.t2_prime_s);
}

bool measure_bright(const AtomState& s, const NoiseConfig& cfg, Rng& rng) {
    if (s.lost || rng.bernoulli(cfg.spam_loss_collision)) return false;
    if (rng.bernoulli(cfg.spam_transfer_error)) return false;
    double p_bright;
    if (s.decohered) {
        p_bright = 0.5;
    } else {
        // The modeled aux level stands for both leak destinations; a leaked
        // atom images bright half of the time.
        p_bright = s.p1() + 0.5 * s.p_aux();
    }
    if (rng.bernoulli(std::clamp(p_bright, 0.0, 1.0))) return true;
    return rng.bernoulli(cfg.spam_clearing_error);  // |0> surviving the clearing pulse
}

double measured_bright_probability(const AtomState& s, const NoiseConfig& cfg) {
    if (s.lost) return 0.0;
    const double survive = (1.0 - cfg.spam_loss_collision) * (1.0 - cfg.spam_transfer_error);
    const double p_b = s.decohered ? 0.5 : std::clamp(s.p1() + 0.5 * s.p_aux(), 0.0, 1.0);
    return survive * (p_b + (1.0 - p_b) * cfg.spam_clearing_error);
}

SpamBounds spam_bounds(const NoiseConfig& cfg) {
    const double survive = (1.0 - cfg.spam_loss_collision) * (1.0 - cfg.spam_transfer_error);
    return {survive, survive * cfg.spam_clearing_error};
}

MeasuredCounts apply_spam(std::span<const double> ideal_p1, const NoiseConfig& cfg, Rng& rng) {
    MeasuredCounts mc;
    for (double p1 : ideal_p1) {
        ++mc.total;
        AtomState s;
        s.a1 = std::sqrt(std::clamp(p1, 0.0, 1.0));
        s.a0 = std::sqrt(std::clamp(1.0 - p1, 0.0, 1.0));
        if (measure_bright(s, cfg, rng)) ++mc.bright;
    }
    return mc;
}

}  // namespace latgate
