#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latgate/noise.hpp"
#include "latgate/phase_model.hpp"

namespace latgate {

// ---- Fringe -------------------------------------------------------------

struct FringeRecord {
    double alpha = 0.0;
    int cls = 0;  // 0 target, 1 line, 2 spectator
    double mean_p1 = 0.0;
    double std_err = 0.0;
};

struct FringeFit {
    double n = 1.0;       // Bloch radius shrinkage
    double theta = 0.0;   // polar angle
    double phi = 0.0;     // azimuth
    double residual = 0.0;
    bool degenerate = false;
};

struct FringeNormalization {
    double max_pop = 0.95;
    double min_pop = 0.01;
};

// Normalize by (max, min) and least-squares fit
// P1(alpha) = n^2 (1 + sin(theta) cos(alpha + phi)) / 2.
FringeFit fit_sinusoid(std::span<const double> alpha, std::span<const double> p1,
                       const FringeNormalization& norm = {});

// F^2 = sqrt(P1) estimator with propagated uncertainty.
struct FidelityEstimate {
    double f2 = 0.0;
    double sigma = 0.0;
    bool one_sided = false;
};
FidelityEstimate fidelity_from_p1(double p1, double sigma_p1 = 0.0);

// ---- Randomized benchmarking ---------------------------------------------

struct RBRecord {
    int length = 0;
    int cls = 0;
    double mean_p1 = 0.0;
    double std_err = 0.0;
    std::vector<double> per_sequence;  // per-sequence mean P1
};

struct RBFit {
    double e2 = 0.0;       // error per gate pair
    double d_if = 0.0;
    double e2_sigma = 0.0;
    double d_if_sigma = 0.0;
    bool d_if_fixed = false;
    bool non_decaying = false;
    double residual = 0.0;
};

// Least-squares fit of F2(l) = 1/2 + (1/2)(1 - d_if)(1 - 2 E2)^l over the
// records of one class; bootstrap CIs over the per-sequence breakdown.
RBFit fit_rb(std::span<const RBRecord> records, std::optional<double> d_if_fixed = std::nullopt,
             int bootstrap = 200, std::uint64_t seed = 1234);

// Eq.-3 forward model, used by tests and the synthetic generator.
double rb_model(int length, double e2, double d_if);

// ---- Spectrum -------------------------------------------------------------

struct SpectrumRecord {
    double detuning_hz = 0.0;
    int cls = 0;  // 0 spectator, 1 line, 2 cross (resonance order)
    double transfer = 0.0;
};

struct GaussianPeak {
    double center_hz = 0.0;
    double width_hz = 0.0;   // Gaussian sigma
    double amplitude = 0.0;
    double residual = 0.0;
};

// Independent per-class Gaussian fits; returns peaks indexed by class.
std::vector<GaussianPeak> fit_gaussians(std::span<const SpectrumRecord> records);

// f_hat = line center, k_hat = cross center / line center.
struct SpectrumCalibration {
    double f_hat_hz = 0.0;
    double k_hat = 0.0;
};
SpectrumCalibration calibrate_from_peaks(std::span<const GaussianPeak> peaks);

// ---- Error algebra ---------------------------------------------------------

struct ValueWithSigma {
    double value = 0.0;
    double sigma = 0.0;
};

struct ErrorDecomposition {
    ValueWithSigma e_t, e_s, e_l;
};

// E_t = E2t - E_s, E_s = E2s / 2, E_l = E2l - E_s, independent-Gaussian
// propagation.  Negative central values are reported, not clipped.
ErrorDecomposition decompose_errors(ValueWithSigma e2t, ValueWithSigma e2s, ValueWithSigma e2l);

// Weighted crosstalk average (n_spec * Es + n_line * El) / (n_spec + n_line).
ValueWithSigma crosstalk_average(ValueWithSigma es, ValueWithSigma el, int n_spec, int n_line);

// ---- Error budget -----------------------------------------------------------

struct BudgetInputs {
    double f_hz = 51.2e3;
    double k = 1.8;
    double delta_op_hz = 0.0;      // compiled operating detuning
    double omega = 0.0;            // envelope-RMS addressing Rabi of the gate
    double t_addr = 120e-6;
    double light_exposure_s = 252e-6;  // per stage
    double curvature = 21.0;       // rad per (df/f)^2 at the extremum
    double theta = 0.5 * kPi;
    NoiseConfig noise;
    IntegratorOpts integ;
    // Measured per-gate errors (absolute), NaN if not available.
    double measured_e_spectator = std::numeric_limits<double>::quiet_NaN();
    double measured_e_line = std::numeric_limits<double>::quiet_NaN();
    double measured_e_target = std::numeric_limits<double>::quiet_NaN();
};

struct ErrorBudget {
    // rows[i][c]: i in {0..4} = rows i..v, c in {0 spectator, 1 line, 2 target};
    // absolute error values (not 1e-4 units).
    double rows[5][3] = {};
    double measured[3] = {};  // per-gate E used for row v (NaN if absent)
    std::string to_text() const;
    std::string to_csv() const;
};

ErrorBudget assemble_budget(const BudgetInputs& in);

// ---- Misc helpers -----------------------------------------------------------

struct MeanStdErr {
    double mean = 0.0;
    double std_err = 0.0;
};
MeanStdErr mean_std_err(std::span<const double> xs);

}  // namespace latgate
