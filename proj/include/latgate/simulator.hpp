#pragma once

#include <functional>
#include <unordered_map>

#include "latgate/compiler.hpp"
#include "latgate/noise.hpp"

namespace latgate {

// Evolves atoms through a compiled sequence in the bare rotating frame.
// Pulse propagators are integrated once per distinct (shape, detuning) and
// reused across the event chain; the drive phase is applied analytically.
class SequenceSimulator {
  public:
    SequenceSimulator(const LatticeConfig& lattice, const SceneSet& scenes,
                      const PulseSequence& seq, const NoiseConfig& noise,
                      IntegratorOpts integ = {});

    // Atom indices refer to `atom_sites`, an arbitrary list of occupied sites.
    void bind_atoms(std::vector<Site> atom_sites);
    const std::vector<Site>& atom_sites() const { return atom_sites_; }

    // Per-shot slow noise; resets per-shot caches.
    void begin_shot(const ShotRealization& real);

    // Evolve one atom; rng drives the stochastic events (scattering, T2').
    AtomState run_atom(int atom_idx, AtomState init, Rng& rng);

    // Deterministic propagator of the whole sequence for one atom (no
    // stochastic events); used for cancellation checks.
    Mat3 atom_propagator(int atom_idx);

    // Aux shift (Hz) of an atom in a scene under the current realization.
    double scene_shift(int atom_idx, int scene);

    double total_time() const { return seq_.total_time; }

  private:
    const Mat2& qubit_propagator(int shape, double eps_rad);
    const Mat2& addressing_propagator(int shape, double aux_det_rad);
    void apply_event(const SeqEvent& e, int atom_idx, double eps_rad, AtomState& s,
                     Mat3* matrix_mode);

    const LatticeConfig& lattice_;
    const SceneSet& scenes_;
    const PulseSequence& seq_;
    NoiseConfig noise_;
    IntegratorOpts integ_;
    std::vector<Site> atom_sites_;
    std::vector<int> atom_site_idx_;
    ShotRealization real_;
    // caches keyed by (shape, quantized parameter bits)
    std::unordered_map<std::uint64_t, Mat2> cache_;
    std::vector<std::vector<double>> scene_shift_hz_;  // [scene][atom]
};

// Runs shots in parallel with deterministic per-shot seeding; results are
// written into caller-indexed storage so worker count cannot reorder them.
void parallel_shots(int n_shots, int workers, const std::function<void(int)>& body);

}  // namespace latgate
