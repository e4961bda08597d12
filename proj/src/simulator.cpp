#include "latgate/simulator.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

namespace latgate {

namespace {

std::uint64_t key_of(int shape, double param) {
    const auto bits = std::bit_cast<std::uint64_t>(param);
    std::uint64_t x = (static_cast<std::uint64_t>(shape) << 1) ^ bits;
    return splitmix64(x);
}

}  // namespace

SequenceSimulator::SequenceSimulator(const LatticeConfig& lattice, const SceneSet& scenes,
                                     const PulseSequence& seq, const NoiseConfig& noise,
                                     IntegratorOpts integ)
    : lattice_(lattice), scenes_(scenes), seq_(seq), noise_(noise), integ_(integ) {}

void SequenceSimulator::bind_atoms(std::vector<Site> atom_sites) {
    atom_sites_ = std::move(atom_sites);
    atom_site_idx_.clear();
    for (const Site& s : atom_sites_) atom_site_idx_.push_back(lattice_.index(s));
}

void SequenceSimulator::begin_shot(const ShotRealization& real) {
    real_ = real;
    cache_.clear();
    scene_shift_hz_.assign(scenes_.scenes.size(), {});
}

double SequenceSimulator::scene_shift(int atom_idx, int scene) {
    if (scene_shift_hz_.size() != scenes_.scenes.size())
        scene_shift_hz_.assign(scenes_.scenes.size(), {});
    auto& v = scene_shift_hz_[scene];
    if (v.empty()) v.assign(atom_sites_.size(), std::numeric_limits<double>::quiet_NaN());
    double& cell = v[atom_idx];
    if (std::isnan(cell))
        cell = aux_shift_hz(scenes_.scenes[scene], scenes_.beams, atom_site_idx_[atom_idx],
                            scenes_.cross_ratio_k, real_.beam_f_factor);
    return cell;
}

const Mat2& SequenceSimulator::qubit_propagator(int shape, double eps_rad) {
    const std::uint64_t k = key_of(shape, eps_rad);
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    const PulseShape& sh = seq_.shapes[shape];
    const Mat2 u = coupled_propagator(sh.duration, sh.peak_rabi * real_.amplitude_factor,
                                      sh.envelope, eps_rad - sh.detuning, integ_);
    return cache_.emplace(k, u).first->second;
}

const Mat2& SequenceSimulator::addressing_propagator(int shape, double aux_det_rad) {
    const std::uint64_t k = key_of(shape, aux_det_rad) * 0x9e3779b97f4a7c15ULL + 1;
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    const PulseShape& sh = seq_.shapes[shape];
    const Mat2 u = coupled_propagator(sh.duration, sh.peak_rabi * real_.amplitude_factor,
                                      sh.envelope, -aux_det_rad, integ_);
    return cache_.emplace(k, u).first->second;
}

void SequenceSimulator::apply_event(const SeqEvent& e, int atom_idx, double eps_rad,
                                    AtomState& s, Mat3* matrix_mode) {
    switch (e.kind) {
        case EventKind::FrameShift:
            return;
        case EventKind::Idle: {
            const double a1_phase = -eps_rad * e.dur;
            double aux_phase = 0.0;
            if (e.scene >= 0) {
                const double shift = kTwoPi * scene_shift(atom_idx, e.scene);
                aux_phase = -shift * 0.5 * (e.light0 + e.light1) * e.dur;
            }
            if (matrix_mode) {
                Mat3 d;
                d.at(1, 1) = std::polar(1.0, a1_phase);
                d.at(2, 2) = std::polar(1.0, aux_phase);
                *matrix_mode = d * *matrix_mode;
            } else {
                s.a1 *= std::polar(1.0, a1_phase);
                s.aux *= std::polar(1.0, aux_phase);
            }
            return;
        }
        case EventKind::QubitPulse: {
            const Mat2 u0 = qubit_propagator(e.shape, eps_rad);
            const Mat2 u = with_drive_phase(u0, e.pulse.phase + e.frame_phase);
            Mat3 m = Mat3::embed(u, 0, 1);
            const cplx back = std::polar(1.0, -e.pulse.detuning * e.dur);
            m.at(1, 0) *= back;
            m.at(1, 1) *= back;
            // aux idles; light is off during qubit pulses in compiled sequences
            if (e.scene >= 0) {
                const double shift = kTwoPi * scene_shift(atom_idx, e.scene);
                m.at(2, 2) = std::polar(1.0, -shift * 0.5 * (e.light0 + e.light1) * e.dur);
            }
            if (matrix_mode)
                *matrix_mode = m * *matrix_mode;
            else
                s.apply(m);
            return;
        }
        case EventKind::AddressingPulse: {
            const double shift = scene_shift(atom_idx, e.scene);
            const double aux_det = e.pulse.detuning - kTwoPi * shift;
            const Mat2 u0 = addressing_propagator(e.shape, aux_det);
            const Mat2 u = with_drive_phase(u0, e.pulse.phase);
            Mat3 m = Mat3::embed(u, 0, 2);
            const cplx back = std::polar(1.0, -e.pulse.detuning * e.dur);
            m.at(2, 0) *= back;
            m.at(2, 2) *= back;
            m.at(1, 1) = std::polar(1.0, -eps_rad * e.dur);
            if (matrix_mode) {
                *matrix_mode = m * *matrix_mode;
                if (!noise_.coherent_aux_leak) {
                    // Inter-stage aux dephasing: drop the coherent aux row.
                    for (int c = 0; c < 3; ++c) matrix_mode->at(2, c) = 0.0;
                }
            } else {
                s.apply(m);
                if (!noise_.coherent_aux_leak) {
                    s.leak += std::norm(s.aux);
                    s.aux = 0.0;
                }
            }
            return;
        }
    }
}

AtomState SequenceSimulator::run_atom(int atom_idx, AtomState init, Rng& rng) {
    const double eps_rad = kTwoPi * (atom_idx < static_cast<int>(real_.atom_detuning_hz.size())
                                         ? real_.atom_detuning_hz[atom_idx]
                                         : 0.0);
    AtomState s = init;
    int stage_seen = -1;
    // Dephasing (T2') as discrete phase-randomization events.
    double next_dephase = std::numeric_limits<double>::infinity();
    if (noise_.t2_prime_s > 0.0)
        next_dephase = -noise_.t2_prime_s * std::log(std::max(rng.uniform(), 1e-300));
    for (const SeqEvent& e : seq_.events) {
        while (e.t0 + e.dur > next_dephase) {
            s.a1 *= std::polar(1.0, kTwoPi * rng.uniform());
            next_dephase += -noise_.t2_prime_s * std::log(std::max(rng.uniform(), 1e-300));
        }
        apply_event(e, atom_idx, eps_rad, s, nullptr);
        if (e.stage >= 0 && e.stage != stage_seen && noise_.scattering_coeff > 0.0) {
            stage_seen = e.stage;
            const StageWindow& w = seq_.stages[e.stage];
            const double shift_khz = scene_shift(atom_idx, w.scene) / 1e3;
            const double p = scattering_probability(shift_khz, w.light_exposure_s, noise_);
            if (p > 0.0 && rng.bernoulli(p)) s.decohered = true;
        }
    }
    return s;
}

Mat3 SequenceSimulator::atom_propagator(int atom_idx) {
    const double eps_rad = kTwoPi * (atom_idx < static_cast<int>(real_.atom_detuning_hz.size())
                                         ? real_.atom_detuning_hz[atom_idx]
                                         : 0.0);
    Mat3 u;
    AtomState dummy;
    for (const SeqEvent& e : seq_.events) apply_event(e, atom_idx, eps_rad, dummy, &u);
    return u;
}

void parallel_shots(int n_shots, int workers, const std::function<void(int)>& body) {
    workers = std::max(1, workers);
    if (workers == 1 || n_shots <= 1) {
        for (int i = 0; i < n_shots; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_shots) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace latgate
