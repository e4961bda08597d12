#include "latgate/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace latgate {

namespace {

// RNG stream tags.
enum : std::uint64_t {
    kTagOccupancy = 0x0CC,
    kTagShot = 0x5407,
    kTagAtomEvents = 0xA70,
    kTagMeasure = 0x3EA5,
    kTagCg = 0xC6,
    kTagPg = 0x96,
    kTagTargets = 0x7A6,
};

struct ShotScratch {
    std::vector<std::uint8_t> occupancy;
};

std::vector<Site> all_sites(const LatticeConfig& lat) {
    std::vector<Site> sites;
    sites.reserve(lat.n_sites());
    for (int i = 0; i < lat.n_sites(); ++i) sites.push_back(lat.site_at(i));
    return sites;
}

std::vector<std::uint8_t> shot_occupancy(const LatticeConfig& lat, std::uint64_t seed,
                                         std::uint64_t a, std::uint64_t b) {
    if (!lat.occupancy.empty()) return lat.occupancy;
    Rng rng(seed, kTagOccupancy, a, b);
    return lat.sample_occupancy(rng);
}

}  // namespace

std::vector<int> union_site_classes(const SceneSet& scenes, const LatticeConfig& lat,
                                    const std::vector<Site>& targets) {
    std::vector<int> cls(lat.n_sites(), kClsSpectator);
    for (const StageScene& sc : scenes.scenes) {
        for (int i = 0; i < lat.n_sites(); ++i) {
            if (sc.illum[i].cls != SiteClass::Spectator) cls[i] = kClsLine;
        }
    }
    for (const Site& t : targets) cls[lat.index(t)] = kClsTarget;
    return cls;
}

std::vector<std::vector<Site>> pair_up_targets(const std::vector<Site>& targets) {
    // Greedy matching that avoids same-plane shared-line pairs (those break
    // the dummy-stage cancellation algebra); leftovers go out as singles.
    std::vector<Site> pool = targets;
    std::vector<std::vector<Site>> pairs;
    while (!pool.empty()) {
        const Site a = pool.front();
        pool.erase(pool.begin());
        int match = -1;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            const Site& b = pool[j];
            const bool shared_line = a.z == b.z && (a.x == b.x || a.y == b.y);
            if (!shared_line) {
                match = static_cast<int>(j);
                if (a.z != b.z) break;  // prefer a distinct-plane partner
            }
        }
        if (match >= 0) {
            pairs.push_back({a, pool[match]});
            pool.erase(pool.begin() + match);
        } else {
            pairs.push_back({a});
        }
    }
    return pairs;
}

std::vector<Site> draw_target_sites(const LatticeConfig& lat, int n, std::uint64_t seed) {
    if (n > lat.n_sites()) throw std::domain_error("draw_target_sites: more targets than sites");
    std::vector<int> idx(lat.n_sites());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, kTagTargets);
    for (int i = 0; i < n; ++i) {
        const int j = i + static_cast<int>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<Site> out;
    for (int i = 0; i < n; ++i) out.push_back(lat.site_at(idx[i]));
    return out;
}

// ---- phase curve ------------------------------------------------------------

PhaseCurveResult run_phase_curve(const ExperimentSetup& s, int points_per_branch) {
    PhaseCurveResult res;
    PhaseGateParams p;
    p.f_hz = s.compiler.f_hz;
    p.k = s.compiler.k;
    p.t_addr = s.compiler.timing.t_addr;

    // Rabi of the default pi/2 gate at its operating detuning.
    SequenceBuilder b(s.lattice, s.compiler);
    const ResolvedGate rg = b.resolve_gate(-0.5 * kPi);
    res.omega = rg.omega;
    p.omega = rg.omega;

    const StageShifts sched = target_stage_shifts(p);
    auto sweep = [&](double lo, double hi) {
        double best_d = 0.0, best_abs = 1e300;
        const int n = points_per_branch;
        for (int i = 0; i < n; ++i) {
            const double d = lo + (hi - lo) * i / (n - 1.0);
            p.delta_hz = d;
            const double ph = exact_gate_phase(p, sched, true, s.compiler.integ);
            res.points.push_back({d, ph});
            if (std::abs(ph) < best_abs) {
                best_abs = std::abs(ph);
                best_d = d;
            }
        }
        return best_d;
    };
    const double f = p.f_hz, kf = p.k * p.f_hz;
    res.second_extremum_hz = sweep(0.10 * f, 0.90 * f);
    res.extremum_delta_hz = sweep(f + 0.08 * (kf - f), f + 0.92 * (kf - f));
    return res;
}

// ---- spectrum ----------------------------------------------------------------

SpectrumResult run_spectrum(const ExperimentSetup& s, double probe_omega_rms,
                            std::vector<double> detuning_grid_hz, int shots) {
    // Reference scene: a two-target gate's cross stage defines the beams;
    // the class responses are probed at the nominal class shifts (spectator
    // 0, line f, cross kf) under the shot's beam factors, so the fitted peak
    // centers mark the class resonances.
    const std::vector<Site> targets = {{1, 1, 1}, {3, 3, 3}};
    SequenceBuilder b(s.lattice, s.compiler);
    b.add_target_rz(targets, 0.0);  // registers the four addressing beams
    const SceneSet& scenes = b.scenes();

    const double t_probe = s.compiler.timing.t_addr;
    const double peak = addressing_peak_from_rms(probe_omega_rms, Envelope::Blackman);
    const double f = s.compiler.f_hz;

    SpectrumResult res;
    const int n_pts = static_cast<int>(detuning_grid_hz.size());
    std::vector<std::array<double, 3>> sum(n_pts, {0, 0, 0});

    for (int shot = 0; shot < shots; ++shot) {
        ShotRealization real = sample_shot(s.noise, 3, static_cast<int>(scenes.beams.size()),
                                           s.seed, shot, kTagShot);
        const double cx = real.beam_f_factor.empty() ? 1.0 : real.beam_f_factor[0];
        const double cy = real.beam_f_factor.size() > 1 ? real.beam_f_factor[1] : 1.0;
        const double shifts[3] = {0.0, f * cx, s.compiler.k * f * 0.5 * (cx + cy)};
        for (int cls = 0; cls < 3; ++cls) {
            const double eps = real.atom_detuning_hz.empty() ? 0.0 : real.atom_detuning_hz[cls];
            for (int g = 0; g < n_pts; ++g) {
                const double aux_det = kTwoPi * (detuning_grid_hz[g] - shifts[cls] - eps);
                const Mat2 u = coupled_propagator(t_probe, peak * real.amplitude_factor,
                                                  Envelope::Blackman, -aux_det, s.compiler.integ);
                sum[g][cls] += std::norm(u.m10);
            }
        }
    }
    for (int g = 0; g < n_pts; ++g)
        for (int cls = 0; cls < 3; ++cls)
            res.records.push_back({detuning_grid_hz[g], cls, sum[g][cls] / shots});
    return res;
}

// ---- fringe -------------------------------------------------------------------

namespace {

struct SeriesProgram {
    PulseSequence seq;
    SceneSet scenes;
    int closing_event = -1;
    double closing_base_phase = 0.0;
    std::vector<int> site_cls;
};

// Opening pi/2, the gate series on target pairs, closing pi/2 whose phase is
// patched per detection angle.
SeriesProgram build_series(const ExperimentSetup& s, double theta,
                           const std::vector<Site>& targets, double closing_offset) {
    SequenceBuilder b(s.lattice, s.compiler);
    const double chi_open = 0.5 * kPi;
    b.add_global_pulse(0.5 * kPi, chi_open, PulseRole::OpeningPulse);
    if (theta != 0.0) {
        for (const auto& pair : pair_up_targets(targets)) b.add_target_rz(pair, theta);
    }
    SeriesProgram prog;
    prog.closing_base_phase = chi_open + kPi + closing_offset;
    prog.closing_event =
        b.add_global_pulse(0.5 * kPi, wrap_angle(prog.closing_base_phase),
                           PulseRole::DetectionPulse);
    const std::vector<Site> all_targets = b.target_sites();
    prog.seq = apply_phase_cycling(b.take());
    prog.scenes = std::move(b.scenes());
    prog.site_cls = union_site_classes(prog.scenes, s.lattice,
                                       all_targets.empty() ? targets : all_targets);
    return prog;
}

}  // namespace

FringeResult run_fringe(const ExperimentSetup& s, double theta, std::vector<Site> targets,
                        std::vector<double> alpha_grid, int shots) {
    SeriesProgram prog = build_series(s, theta, targets, 0.0);
    FringeResult res;
    res.targets = targets;

    const std::vector<Site> sites = all_sites(s.lattice);
    const int n_beams = static_cast<int>(prog.scenes.beams.size());
    double target_count_sum = 0.0;
    int target_count_shots = 0;

    for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai) {
        prog.seq.events[prog.closing_event].pulse.phase =
            wrap_angle(prog.closing_base_phase + alpha_grid[ai]);
        // per-shot, per-class (bright, present)
        std::vector<std::array<double, 3>> frac(shots, {-1, -1, -1});
        parallel_shots(shots, s.workers, [&](int shot) {
            const auto occ = shot_occupancy(s.lattice, s.seed, ai, shot);
            ShotRealization real = sample_shot(s.noise, s.lattice.n_sites(), n_beams, s.seed,
                                               shot, kTagShot ^ (ai * 0x9e37));
            SequenceSimulator sim(s.lattice, prog.scenes, prog.seq, s.noise, s.compiler.integ);
            sim.bind_atoms(sites);
            sim.begin_shot(real);
            double bright[3] = {0, 0, 0};
            int present[3] = {0, 0, 0};
            for (int i = 0; i < s.lattice.n_sites(); ++i) {
                if (!occ[i]) continue;
                Rng arng(s.seed, kTagAtomEvents, (ai << 20) ^ shot, i);
                AtomState st = sim.run_atom(i, AtomState::one_state(), arng);
                const int c = prog.site_cls[i];
                ++present[c];
                bright[c] += measured_bright_probability(st, s.noise);
            }
            for (int c = 0; c < 3; ++c)
                frac[shot][c] = present[c] ? bright[c] / present[c] : -1.0;
        });
        for (int c = 0; c < 3; ++c) {
            std::vector<double> xs;
            for (int shot = 0; shot < shots; ++shot)
                if (frac[shot][c] >= 0.0) xs.push_back(frac[shot][c]);
            if (xs.empty()) continue;
            const MeanStdErr m = mean_std_err(xs);
            res.records.push_back({alpha_grid[ai], c, m.mean, m.std_err});
        }
        if (ai == 0) {
            for (int shot = 0; shot < shots; ++shot) {
                const auto occ = shot_occupancy(s.lattice, s.seed, ai, shot);
                int n_t = 0;
                for (const Site& t : targets)
                    if (occ[s.lattice.index(t)]) ++n_t;
                target_count_sum += n_t;
                ++target_count_shots;
            }
        }
    }
    if (target_count_shots > 0) res.mean_targets_per_shot = target_count_sum / target_count_shots;
    return res;
}

// ---- randomized benchmarking ----------------------------------------------------

namespace {

struct CliffordDraw {
    std::array<double, 3> cg_axis;
    PauliGate pg;
};

std::array<double, 3> draw_cg_axis(Rng& rng) {
    switch (rng.below(4)) {
        case 0: return {1, 0, 0};
        case 1: return {-1, 0, 0};
        case 2: return {0, 1, 0};
        default: return {0, -1, 0};
    }
}

PauliGate draw_pg(Rng& rng) {
    switch (rng.below(7)) {
        case 0: return PauliGate::Xp;
        case 1: return PauliGate::Xm;
        case 2: return PauliGate::Yp;
        case 3: return PauliGate::Ym;
        case 4: return PauliGate::Zp;
        case 5: return PauliGate::Zm;
        default: return PauliGate::I;
    }
}

Mat2 pauli_matrix(PauliGate g) {
    switch (g) {
        case PauliGate::Xp: return rot_xy(kPi, 0.0);
        case PauliGate::Xm: return rot_xy(kPi, kPi);
        case PauliGate::Yp: return rot_xy(kPi, 0.5 * kPi);
        case PauliGate::Ym: return rot_xy(kPi, -0.5 * kPi);
        case PauliGate::Zp: return rot_z(kPi);
        case PauliGate::Zm: return rot_z(-kPi);
        case PauliGate::I: return Mat2::identity();
    }
    return Mat2::identity();
}

}  // namespace

RBResult run_rb(const ExperimentSetup& s, const RBConfig& cfg, std::array<Site, 2> targets) {
    RBResult res;
    const std::vector<Site> sites = all_sites(s.lattice);
    const std::vector<Site> target_list = {targets[0], targets[1]};

    for (std::size_t li = 0; li < cfg.lengths.size(); ++li) {
        const int length = cfg.lengths[li];
        if (length < 1) throw std::domain_error("run_rb: lengths must be >= 1");
        if (li > 0 && cfg.lengths[li] <= cfg.lengths[li - 1])
            throw std::domain_error("run_rb: lengths must be strictly increasing");

        std::vector<double> per_seq_target, per_seq_line, per_seq_spec;
        const int pg_max = std::max(cfg.pg_randomizations_target, cfg.pg_randomizations_nontarget);
        for (int ci = 0; ci < cfg.cg_randomizations; ++ci) {
            for (int pi_ = 0; pi_ < pg_max; ++pi_) {
                // Draw the sequence.
                Rng cg_rng(s.seed, kTagCg, li, ci);
                Rng pg_rng(s.seed, kTagPg, li * 131 + ci, pi_);
                std::vector<CliffordDraw> draws(length);
                for (auto& d : draws) {
                    d.cg_axis = draw_cg_axis(cg_rng);
                    d.pg = draw_pg(pg_rng);
                }

                if (cfg.synthetic) {
                    if (pi_ >= cfg.pg_randomizations_target) continue;
                    std::vector<double> shot_p1(cfg.shots_per_point);
                    parallel_shots(cfg.shots_per_point, s.workers, [&](int shot) {
                        Rng rng(s.seed, kTagAtomEvents,
                                (static_cast<std::uint64_t>(li) << 24) ^
                                    (static_cast<std::uint64_t>(ci) << 16) ^
                                    (static_cast<std::uint64_t>(pi_) << 8),
                                shot);
                        int bright = 0, total = 0;
                        for (int a = 0; a < 2; ++a) {
                            bool depol = false;
                            for (int j = 0; j < length && !depol; ++j)
                                depol = rng.bernoulli(2.0 * cfg.synthetic_e2);
                            bool is_bright = depol ? rng.bernoulli(0.5) : true;
                            if (rng.bernoulli(0.5 * cfg.synthetic_d_if)) is_bright = !is_bright;
                            ++total;
                            if (is_bright) ++bright;
                        }
                        shot_p1[shot] = static_cast<double>(bright) / total;
                        (void)0;
                    });
                    const MeanStdErr m = mean_std_err(shot_p1);
                    per_seq_target.push_back(m.mean);
                    continue;
                }

                // Compile both detection variants while tracking the ideal.
                auto build_variant = [&](bool target_detect) {
                    SequenceBuilder b(s.lattice, s.compiler);
                    Mat2 ideal_t, ideal_nt;
                    for (const auto& d : draws) {
                        b.add_pauli(d.pg);
                        const Mat2 pg_m = pauli_matrix(d.pg);
                        ideal_t = pg_m * ideal_t;
                        ideal_nt = pg_m * ideal_nt;
                        b.add_target_rotation(d.cg_axis, 0.5 * kPi, target_list);
                        ideal_t = rot_axis(0.5 * kPi, d.cg_axis[0], d.cg_axis[1], d.cg_axis[2]) *
                                  ideal_t;
                    }
                    const Mat2& ideal = target_detect ? ideal_t : ideal_nt;
                    const DetectionPlan plan = compile_detection(ideal, b.frame_ledger());
                    add_detection(b, plan);
                    struct Out {
                        PulseSequence seq;
                        SceneSet scenes;
                    } out;
                    out.seq = apply_phase_cycling(b.take());
                    out.scenes = std::move(b.scenes());
                    return out;
                };

                for (int variant = 0; variant < 2; ++variant) {
                    const bool target_detect = variant == 0;
                    if (target_detect && pi_ >= cfg.pg_randomizations_target) continue;
                    if (!target_detect && pi_ >= cfg.pg_randomizations_nontarget) continue;
                    auto prog = build_variant(target_detect);
                    const auto cls = union_site_classes(prog.scenes, s.lattice, target_list);
                    const int n_beams = static_cast<int>(prog.scenes.beams.size());

                    std::vector<std::array<double, 3>> frac(cfg.shots_per_point, {-1, -1, -1});
                    parallel_shots(cfg.shots_per_point, s.workers, [&](int shot) {
                        const std::uint64_t seq_tag = (static_cast<std::uint64_t>(li) << 16) ^
                                                      (static_cast<std::uint64_t>(ci) << 8) ^
                                                      static_cast<std::uint64_t>(pi_);
                        auto occ = shot_occupancy(s.lattice, s.seed, seq_tag, shot);
                        for (const Site& t : target_list) occ[s.lattice.index(t)] = 1;
                        ShotRealization real = sample_shot(
                            s.noise, s.lattice.n_sites(), n_beams, s.seed, shot,
                            kTagShot ^ (seq_tag << 2) ^ static_cast<std::uint64_t>(variant));
                        SequenceSimulator sim(s.lattice, prog.scenes, prog.seq, s.noise,
                                              s.compiler.integ);
                        sim.bind_atoms(sites);
                        sim.begin_shot(real);
                        double bright[3] = {0, 0, 0};
                        int present[3] = {0, 0, 0};
                        for (int i = 0; i < s.lattice.n_sites(); ++i) {
                            if (!occ[i]) continue;
                            const int c = cls[i];
                            if (target_detect != (c == kClsTarget)) continue;
                            const std::uint64_t atom_tag =
                                (seq_tag << 24) ^ (static_cast<std::uint64_t>(variant) << 20) ^
                                static_cast<std::uint64_t>(shot);
                            Rng arng(s.seed, kTagAtomEvents, atom_tag, i);
                            AtomState st = sim.run_atom(i, AtomState::one_state(), arng);
                            ++present[c];
                            bright[c] += measured_bright_probability(st, s.noise);
                        }
                        for (int c = 0; c < 3; ++c)
                            frac[shot][c] = present[c] ? bright[c] / present[c] : -1.0;
                    });
                    auto seq_mean = [&](int c) {
                        std::vector<double> xs;
                        for (const auto& f : frac)
                            if (f[c] >= 0.0) xs.push_back(f[c]);
                        return xs.empty() ? -1.0 : mean_std_err(xs).mean;
                    };
                    if (target_detect) {
                        per_seq_target.push_back(seq_mean(kClsTarget));
                    } else {
                        const double ml = seq_mean(kClsLine);
                        const double ms = seq_mean(kClsSpectator);
                        if (ml >= 0.0) per_seq_line.push_back(ml);
                        if (ms >= 0.0) per_seq_spec.push_back(ms);
                    }
                }
            }
        }
        auto push_record = [&](int cls, std::vector<double>& seqs) {
            if (seqs.empty()) return;
            const MeanStdErr m = mean_std_err(seqs);
            RBRecord rec;
            rec.length = length;
            rec.cls = cls;
            rec.mean_p1 = m.mean;
            rec.std_err = m.std_err;
            rec.per_sequence = seqs;
            res.records.push_back(std::move(rec));
        };
        push_record(kClsTarget, per_seq_target);
        push_record(kClsLine, per_seq_line);
        push_record(kClsSpectator, per_seq_spec);
    }
    return res;
}

// ---- robustness -------------------------------------------------------------------

RobustnessResult run_robustness(const ExperimentSetup& s, std::vector<Site> targets,
                                std::vector<double> frac_shift_grid, int shots) {
    // The target fringe runs as (1 + cos(alpha + theta))/2; closing at
    // alpha = -theta returns the targets to |1>.
    SeriesProgram prog = build_series(s, 0.5 * kPi, targets, -0.5 * kPi);
    const std::vector<Site> sites = all_sites(s.lattice);
    const int n_beams = static_cast<int>(prog.scenes.beams.size());

    RobustnessResult res;
    for (std::size_t gi = 0; gi < frac_shift_grid.size(); ++gi) {
        const double x = frac_shift_grid[gi];
        std::vector<double> shot_p1(shots, -1.0);
        parallel_shots(shots, s.workers, [&](int shot) {
            auto occ = shot_occupancy(s.lattice, s.seed, gi, shot);
            for (const Site& t : targets) occ[s.lattice.index(t)] = 1;
            ShotRealization real = sample_shot(s.noise, s.lattice.n_sites(), n_beams, s.seed,
                                               shot, kTagShot ^ (gi * 0x517));
            for (auto& bf : real.beam_f_factor) bf *= (1.0 + x);
            SequenceSimulator sim(s.lattice, prog.scenes, prog.seq, s.noise, s.compiler.integ);
            sim.bind_atoms(sites);
            sim.begin_shot(real);
            double bright = 0;
            int present = 0;
            for (int i = 0; i < s.lattice.n_sites(); ++i) {
                if (!occ[i] || prog.site_cls[i] != kClsTarget) continue;
                Rng arng(s.seed, kTagAtomEvents, (gi << 20) ^ shot, i);
                AtomState st = sim.run_atom(i, AtomState::one_state(), arng);
                ++present;
                bright += measured_bright_probability(st, s.noise);
            }
            shot_p1[shot] = present ? bright / present : -1.0;
        });
        std::vector<double> xs;
        for (double v : shot_p1)
            if (v >= 0.0) xs.push_back(v);
        const MeanStdErr m = mean_std_err(xs);
        // Normalize by the SPAM bounds, then F^2 = sqrt(P1).
        const SpamBounds sb = spam_bounds(s.noise);
        const double span = sb.max_pop - sb.min_pop;
        const double p1n = std::clamp((m.mean - sb.min_pop) / span, 0.0, 1.0);
        const FidelityEstimate fe = fidelity_from_p1(p1n, m.std_err / span);
        res.points.push_back({x, fe.f2, fe.sigma});
    }
    return res;
}

// ---- pattern ------------------------------------------------------------------------

PatternResult run_pattern(const ExperimentSetup& s, const Pattern& pattern, double theta,
                          int shots) {
    ExperimentSetup s2 = s;
    s2.lattice = pattern.lattice;
    if (s.lattice.occupancy.empty()) s2.lattice.occupancy.clear();  // sample per shot
    SeriesProgram prog = build_series(s2, theta, pattern.targets, 0.0);
    // Closing pulse phase: same azimuth as the opening completes a pi for
    // non-targets (|1> -> |0>, dark) and returns Rz(pi) targets to |1>.
    prog.seq.events[prog.closing_event].pulse.phase = wrap_angle(0.5 * kPi);

    const std::vector<Site> sites = all_sites(s2.lattice);
    const int n_beams = static_cast<int>(prog.scenes.beams.size());

    std::vector<PatternSiteCount> counts(s2.lattice.n_sites());
    for (int i = 0; i < s2.lattice.n_sites(); ++i) counts[i].site = s2.lattice.site_at(i);
    for (const Site& t : pattern.targets) counts[s2.lattice.index(t)].targeted = true;

    std::vector<std::vector<std::uint8_t>> bright(shots);
    std::vector<std::vector<std::uint8_t>> present(shots);
    parallel_shots(shots, s.workers, [&](int shot) {
        const auto occ = shot_occupancy(s2.lattice, s.seed, 0, shot);
        ShotRealization real = sample_shot(s.noise, s2.lattice.n_sites(), n_beams, s.seed, shot,
                                           kTagShot);
        SequenceSimulator sim(s2.lattice, prog.scenes, prog.seq, s.noise, s.compiler.integ);
        sim.bind_atoms(sites);
        sim.begin_shot(real);
        bright[shot].assign(s2.lattice.n_sites(), 0);
        present[shot] = occ;
        for (int i = 0; i < s2.lattice.n_sites(); ++i) {
            if (!occ[i]) continue;
            Rng arng(s.seed, kTagAtomEvents, shot, i);
            AtomState st = sim.run_atom(i, AtomState::one_state(), arng);
            Rng mrng(s.seed, kTagMeasure, shot, i);
            if (mrng.uniform() < measured_bright_probability(st, s.noise)) bright[shot][i] = 1;
        }
    });
    for (int shot = 0; shot < shots; ++shot) {
        for (int i = 0; i < s2.lattice.n_sites(); ++i) {
            counts[i].present += present[shot][i];
            counts[i].bright += bright[shot][i];
        }
    }
    PatternResult res;
    res.sites = std::move(counts);
    return res;
}

// ---- echo stress ---------------------------------------------------------------------

EchoStressResult run_echo_stress(const ExperimentSetup& s, int n_pulses,
                                 std::vector<double> rabi_error_grid, EchoScheme scheme,
                                 double tau_s, int alpha_points, int shots) {
    if (scheme == EchoScheme::Cycled && n_pulses % 4 != 0)
        throw std::domain_error("run_echo_stress: cycled scheme needs a multiple of 4 pulses");
    EchoStressResult res;
    const std::vector<Site> sites = all_sites(s.lattice);

    for (std::size_t gi = 0; gi < rabi_error_grid.size(); ++gi) {
        const double eps = rabi_error_grid[gi];
        SequenceBuilder b(s.lattice, s.compiler);
        const double chi_open = 0.5 * kPi;
        b.add_global_pulse(0.5 * kPi, chi_open, PulseRole::OpeningPulse);
        for (int k = 0; k < n_pulses; ++k) {
            b.add_idle(0.5 * tau_s);
            b.add_global_pulse(kPi, 0.5 * kPi, PulseRole::EchoPi);
            b.add_idle(0.5 * tau_s);
        }
        const int closing =
            b.add_global_pulse(0.5 * kPi, wrap_angle(chi_open + kPi), PulseRole::DetectionPulse);
        PulseSequence seq = b.take();
        // Torque-axis scheme.
        int echo_i = 0;
        for (SeqEvent& e : seq.events) {
            if (e.role != PulseRole::EchoPi) continue;
            switch (scheme) {
                case EchoScheme::Cycled: {
                    static constexpr double kCycle[4] = {0.5 * kPi, 0.5 * kPi, -0.5 * kPi,
                                                         -0.5 * kPi};
                    e.pulse.phase = kCycle[echo_i % 4];
                    break;
                }
                case EchoScheme::Naive:
                    e.pulse.phase = 0.5 * kPi;
                    break;
                case EchoScheme::XY:
                    e.pulse.phase = (echo_i % 2 == 0) ? 0.0 : 0.5 * kPi;
                    break;
            }
            ++echo_i;
        }
        // Fractional Rabi error on the pi pulses only.
        {
            std::vector<int> pi_shapes;
            for (const SeqEvent& e : seq.events)
                if (e.role == PulseRole::EchoPi) pi_shapes.push_back(e.shape);
            std::sort(pi_shapes.begin(), pi_shapes.end());
            pi_shapes.erase(std::unique(pi_shapes.begin(), pi_shapes.end()), pi_shapes.end());
            for (int sh : pi_shapes) seq.shapes[sh].peak_rabi *= (1.0 + eps);
            for (SeqEvent& e : seq.events)
                if (e.role == PulseRole::EchoPi) e.pulse.peak_rabi *= (1.0 + eps);
        }

        SceneSet no_scenes;
        std::vector<double> alphas(alpha_points);
        std::vector<double> mean_p1(alpha_points, 0.0);
        for (int ai = 0; ai < alpha_points; ++ai) {
            alphas[ai] = kTwoPi * ai / alpha_points;
            seq.events[closing].pulse.phase = wrap_angle(chi_open + kPi + alphas[ai]);
            std::vector<double> shot_p1(shots, -1.0);
            parallel_shots(shots, s.workers, [&](int shot) {
                const auto occ = shot_occupancy(s.lattice, s.seed, (gi << 8) ^ ai, shot);
                ShotRealization real = sample_shot(s.noise, s.lattice.n_sites(), 0, s.seed, shot,
                                                   kTagShot ^ (gi << 8) ^ ai);
                SequenceSimulator sim(s.lattice, no_scenes, seq, s.noise, s.compiler.integ);
                sim.bind_atoms(sites);
                sim.begin_shot(real);
                double acc = 0.0;
                int n = 0;
                for (int i = 0; i < s.lattice.n_sites(); ++i) {
                    if (!occ[i]) continue;
                    Rng arng(s.seed, kTagAtomEvents, (gi << 28) ^ (ai << 20) ^ shot, i);
                    AtomState st = sim.run_atom(i, AtomState::one_state(), arng);
                    acc += st.p1();
                    ++n;
                }
                shot_p1[shot] = n ? acc / n : -1.0;
            });
            std::vector<double> xs;
            for (double v : shot_p1)
                if (v >= 0.0) xs.push_back(v);
            mean_p1[ai] = xs.empty() ? 0.0 : mean_std_err(xs).mean;
        }
        const FringeFit fit = fit_sinusoid(alphas, mean_p1, {1.0, 0.0});
        res.points.push_back({eps, fit.n * fit.n * std::sin(fit.theta)});
    }
    return res;
}

// ---- CSV ---------------------------------------------------------------------------------

std::string csv_to_string(const std::string& header,
                          const std::vector<std::vector<double>>& rows) {
    std::string out = header;
    out += '\n';
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.12g", row[i]);
            out += buf;
            out += (i + 1 < row.size()) ? ',' : '\n';
        }
    }
    return out;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << csv_to_string(header, rows);
}

}  // namespace latgate
