#include "latgate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "latgate/rng.hpp"

namespace latgate {

MeanStdErr mean_std_err(std::span<const double> xs) {
    MeanStdErr r;
    if (xs.empty()) return r;
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std_err = std::sqrt(ss / (xs.size() - 1.0) / xs.size());
    return r;
}

FringeFit fit_sinusoid(std::span<const double> alpha, std::span<const double> p1,
                       const FringeNormalization& norm) {
    if (alpha.size() != p1.size() || alpha.size() < 5)
        throw std::domain_error("fit_sinusoid: need >= 5 points");
    // Normalize, then solve the linear least squares for
    // P = A + B cos(alpha) + C sin(alpha).
    const double span_pop = norm.max_pop - norm.min_pop;
    double sww[3][3] = {};
    double swy[3] = {};
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double y = (p1[i] - norm.min_pop) / span_pop;
        const double w[3] = {1.0, std::cos(alpha[i]), std::sin(alpha[i])};
        for (int r = 0; r < 3; ++r) {
            swy[r] += w[r] * y;
            for (int c = 0; c < 3; ++c) sww[r][c] += w[r] * w[c];
        }
    }
    // 3x3 Gaussian elimination.
    double m[3][4];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = sww[r][c];
        m[r][3] = swy[r];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        if (std::abs(m[col][col]) < 1e-14) throw std::runtime_error("fit_sinusoid: singular fit");
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double fct = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= fct * m[col][c];
        }
    }
    const double A = m[0][3] / m[0][0];
    const double B = m[1][3] / m[1][1];
    const double C = m[2][3] / m[2][2];

    FringeFit fit;
    const double amp = std::sqrt(B * B + C * C);
    fit.n = std::sqrt(std::clamp(2.0 * A, 0.0, 1.0));
    const double sin_theta = (A > 1e-12) ? std::clamp(amp / A, 0.0, 1.0) : 0.0;
    fit.theta = std::asin(sin_theta);
    fit.phi = std::atan2(-C, B);
    fit.degenerate = amp < 1e-6;
    double ss = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double y = (p1[i] - norm.min_pop) / span_pop;
        const double model = A + B * std::cos(alpha[i]) + C * std::sin(alpha[i]);
        ss += (y - model) * (y - model);
    }
    fit.residual = std::sqrt(ss / alpha.size());
    return fit;
}

FidelityEstimate fidelity_from_p1(double p1, double sigma_p1) {
    if (p1 < 0.0 || p1 > 1.0) throw std::domain_error("fidelity_from_p1: p1 outside [0,1]");
    FidelityEstimate e;
    e.f2 = std::sqrt(p1);
    if (p1 == 0.0) {
        e.one_sided = true;
        e.sigma = std::sqrt(sigma_p1);
    } else {
        e.sigma = sigma_p1 / (2.0 * e.f2);
    }
    return e;
}

double rb_model(int length, double e2, double d_if) {
    return 0.5 + 0.5 * (1.0 - d_if) * std::pow(1.0 - 2.0 * e2, length);
}

namespace {

struct RBPoint {
    int length;
    double p1;
};

// Least squares on (e2, d_if); multi-start coarse grid + Gauss-Newton.
struct RBSolve {
    double e2, d_if, residual;
};

RBSolve rb_least_squares(const std::vector<RBPoint>& pts, std::optional<double> d_fixed) {
    auto cost = [&](double e2, double d) {
        double ss = 0.0;
        for (const auto& p : pts) {
            const double r = rb_model(p.length, e2, d) - p.p1;
            ss += r * r;
        }
        return ss;
    };
    double best_e2 = 1e-4, best_d = d_fixed.value_or(0.05), best_c = 1e300;
    for (int ie = 0; ie <= 60; ++ie) {
        const double e2 = 0.2499 * ie / 60.0;
        if (d_fixed) {
            const double c = cost(e2, *d_fixed);
            if (c < best_c) {
                best_c = c;
                best_e2 = e2;
            }
        } else {
            for (int id = 0; id <= 40; ++id) {
                const double d = 0.9 * id / 40.0;
                const double c = cost(e2, d);
                if (c < best_c) {
                    best_c = c;
                    best_e2 = e2;
                    best_d = d;
                }
            }
        }
    }
    // Gauss-Newton refinement with numeric Jacobian.
    double e2 = best_e2, d = d_fixed.value_or(best_d);
    for (int it = 0; it < 200; ++it) {
        double jtj[2][2] = {};
        double jtr[2] = {};
        const double he = std::max(1e-9, 1e-6 * std::abs(e2));
        const double hd = 1e-7;
        for (const auto& p : pts) {
            const double r = rb_model(p.length, e2, d) - p.p1;
            const double je = (rb_model(p.length, e2 + he, d) - rb_model(p.length, e2 - he, d)) /
                              (2.0 * he);
            const double jd = d_fixed ? 0.0
                                      : (rb_model(p.length, e2, d + hd) -
                                         rb_model(p.length, e2, d - hd)) /
                                            (2.0 * hd);
            jtj[0][0] += je * je;
            jtj[0][1] += je * jd;
            jtj[1][0] += je * jd;
            jtj[1][1] += jd * jd;
            jtr[0] += je * r;
            jtr[1] += jd * r;
        }
        double de = 0.0, dd = 0.0;
        if (d_fixed) {
            if (jtj[0][0] < 1e-300) break;
            de = -jtr[0] / jtj[0][0];
        } else {
            const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
            if (std::abs(det) < 1e-300) break;
            de = (-jtr[0] * jtj[1][1] + jtr[1] * jtj[0][1]) / det;
            dd = (-jtr[1] * jtj[0][0] + jtr[0] * jtj[1][0]) / det;
        }
        e2 = std::clamp(e2 + de, 0.0, 0.4999);
        if (!d_fixed) d = std::clamp(d + dd, 0.0, 0.999);
        if (std::abs(de) < 1e-12 && std::abs(dd) < 1e-12) break;
    }
    return {e2, d, cost(e2, d)};
}

}  // namespace

RBFit fit_rb(std::span<const RBRecord> records, std::optional<double> d_if_fixed, int bootstrap,
             std::uint64_t seed) {
    // Group by length (one class expected).
    std::vector<RBPoint> pts;
    for (const auto& r : records) pts.push_back({r.length, r.mean_p1});
    if (pts.size() < 3) throw std::domain_error("fit_rb: need >= 3 lengths");
    const RBSolve sol = rb_least_squares(pts, d_if_fixed);

    RBFit fit;
    fit.e2 = sol.e2;
    fit.d_if = d_if_fixed.value_or(sol.d_if);
    fit.d_if_fixed = d_if_fixed.has_value();
    fit.residual = sol.residual;

    // Bootstrap over per-sequence means.
    std::vector<double> e2s, ds;
    Rng rng(seed, 0xB005);
    for (int b = 0; b < bootstrap; ++b) {
        std::vector<RBPoint> bp;
        for (const auto& r : records) {
            if (r.per_sequence.empty()) {
                bp.push_back({r.length, r.mean_p1});
                continue;
            }
            double acc = 0.0;
            for (std::size_t k = 0; k < r.per_sequence.size(); ++k)
                acc += r.per_sequence[rng.below(r.per_sequence.size())];
            bp.push_back({r.length, acc / r.per_sequence.size()});
        }
        const RBSolve bs = rb_least_squares(bp, d_if_fixed);
        e2s.push_back(bs.e2);
        ds.push_back(bs.d_if);
    }
    if (!e2s.empty()) {
        auto sd = [](const std::vector<double>& v) {
            double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            double ss = 0.0;
            for (double x : v) ss += (x - m) * (x - m);
            return std::sqrt(ss / std::max<std::size_t>(1, v.size() - 1));
        };
        fit.e2_sigma = sd(e2s);
        fit.d_if_sigma = d_if_fixed ? 0.0 : sd(ds);
    }
    fit.non_decaying = fit.e2 - 2.0 * fit.e2_sigma <= 0.0;
    return fit;
}

std::vector<GaussianPeak> fit_gaussians(std::span<const SpectrumRecord> records) {
    int n_cls = 0;
    for (const auto& r : records) n_cls = std::max(n_cls, r.cls + 1);
    std::vector<GaussianPeak> peaks(n_cls);
    for (int c = 0; c < n_cls; ++c) {
        std::vector<double> x, y;
        for (const auto& r : records) {
            if (r.cls != c) continue;
            x.push_back(r.detuning_hz);
            y.push_back(r.transfer);
        }
        if (x.size() < 3) throw std::domain_error("fit_gaussians: need >= 3 points per peak");
        // Start from the maximum point; width from the span of the upper half.
        std::size_t imax = 0;
        for (std::size_t i = 1; i < x.size(); ++i)
            if (y[i] > y[imax]) imax = i;
        double a = y[imax], c0 = x[imax];
        double lo = c0, hi = c0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (y[i] >= 0.5 * a) {
                lo = std::min(lo, x[i]);
                hi = std::max(hi, x[i]);
            }
        }
        double w = std::max((hi - lo) / 2.355, 1e-6 * std::max(1.0, std::abs(c0)));
        // Gauss-Newton on (a, c0, w).
        for (int it = 0; it < 300; ++it) {
            double jtj[3][3] = {}, jtr[3] = {};
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double dx = x[i] - c0;
                const double g = std::exp(-0.5 * dx * dx / (w * w));
                const double r = a * g - y[i];
                const double j[3] = {g, a * g * dx / (w * w), a * g * dx * dx / (w * w * w)};
                for (int m = 0; m < 3; ++m) {
                    jtr[m] += j[m] * r;
                    for (int n2 = 0; n2 < 3; ++n2) jtj[m][n2] += j[m] * j[n2];
                }
            }
            for (int m = 0; m < 3; ++m) jtj[m][m] *= 1.0 + 1e-9;
            // solve 3x3
            double mt[3][4];
            for (int r2 = 0; r2 < 3; ++r2) {
                for (int c2 = 0; c2 < 3; ++c2) mt[r2][c2] = jtj[r2][c2];
                mt[r2][3] = -jtr[r2];
            }
            bool singular = false;
            for (int col = 0; col < 3; ++col) {
                int piv = col;
                for (int r2 = col + 1; r2 < 3; ++r2)
                    if (std::abs(mt[r2][col]) > std::abs(mt[piv][col])) piv = r2;
                std::swap(mt[col], mt[piv]);
                if (std::abs(mt[col][col]) < 1e-300) {
                    singular = true;
                    break;
                }
                for (int r2 = 0; r2 < 3; ++r2) {
                    if (r2 == col) continue;
                    const double fct = mt[r2][col] / mt[col][col];
                    for (int c2 = col; c2 < 4; ++c2) mt[r2][c2] -= fct * mt[col][c2];
                }
            }
            if (singular) break;
            const double da = mt[0][3] / mt[0][0];
            const double dc = mt[1][3] / mt[1][1];
            const double dw = mt[2][3] / mt[2][2];
            a += da;
            c0 += dc;
            w = std::abs(w + dw);
            if (std::abs(da) + std::abs(dc) + std::abs(dw) < 1e-12 * std::max(1.0, std::abs(c0)))
                break;
        }
        double ss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double dx = x[i] - c0;
            const double r = a * std::exp(-0.5 * dx * dx / (w * w)) - y[i];
            ss += r * r;
        }
        peaks[c] = {c0, w, a, std::sqrt(ss / x.size())};
    }
    return peaks;
}

SpectrumCalibration calibrate_from_peaks(std::span<const GaussianPeak> peaks) {
    if (peaks.size() < 3) throw std::domain_error("calibrate_from_peaks: need 3 class peaks");
    SpectrumCalibration cal;
    cal.f_hat_hz = peaks[1].center_hz;
    cal.k_hat = peaks[2].center_hz / peaks[1].center_hz;
    return cal;
}

ErrorDecomposition decompose_errors(ValueWithSigma e2t, ValueWithSigma e2s, ValueWithSigma e2l) {
    ErrorDecomposition d;
    d.e_s = {0.5 * e2s.value, 0.5 * e2s.sigma};
    d.e_t = {e2t.value - d.e_s.value, std::hypot(e2t.sigma, d.e_s.sigma)};
    d.e_l = {e2l.value - d.e_s.value, std::hypot(e2l.sigma, d.e_s.sigma)};
    return d;
}

ValueWithSigma crosstalk_average(ValueWithSigma es, ValueWithSigma el, int n_spec, int n_line) {
    if (n_spec + n_line <= 0) throw std::domain_error("crosstalk_average: empty weights");
    const double ws = static_cast<double>(n_spec) / (n_spec + n_line);
    const double wl = static_cast<double>(n_line) / (n_spec + n_line);
    return {ws * es.value + wl * el.value, std::hypot(ws * es.sigma, wl * el.sigma)};
}

ErrorBudget assemble_budget(const BudgetInputs& in) {
    ErrorBudget b;
    // Row i: spontaneous emission from the addressing light; per-gate stage
    // exposures (spectator 0, line 2f, target (k+2)f).
    const double f_khz = in.f_hz / 1e3;
    b.rows[0][0] = 0.0;
    b.rows[0][1] = scattering_probability(2.0 * f_khz, in.light_exposure_s, in.noise);
    b.rows[0][2] = scattering_probability((in.k + 2.0) * f_khz, in.light_exposure_s, in.noise);
    // Row ii: phase offset from the f spread at the operating extremum,
    // dphi = curvature * X^2 with X ~ N(0, sigma_f); the row is the
    // Gaussian-averaged fidelity error E[sin^2(dphi/2)] = 3 curv^2 sigma^4/4.
    const double sf = in.noise.f_spread_sigma;
    b.rows[1][2] = 0.75 * in.curvature * in.curvature * sf * sf * sf * sf;
    // Row iii: amplitude jitter on the addressing microwave; the phase goes
    // as the power, dphi = 2 sigma_a theta, averaged the same way.
    const double dphi_mw = 2.0 * in.noise.amplitude_jitter_sigma * std::abs(in.theta);
    b.rows[2][2] = 0.25 * dphi_mw * dphi_mw;
    // Row iv: exact off-resonant transfer per gate (per-stage sums over the
    // class schedules).
    if (in.omega > 0.0) {
        PhaseGateParams p;
        p.f_hz = in.f_hz;
        p.k = in.k;
        p.delta_hz = in.delta_op_hz;
        p.omega = in.omega;
        p.t_addr = in.t_addr;
        const double ts = addressing_transfer(p, 0.0, in.integ);
        const double tl = addressing_transfer(p, in.f_hz, in.integ);
        const double tc = addressing_transfer(p, in.k * in.f_hz, in.integ);
        b.rows[3][1] = 2.0 * tl + 2.0 * ts;
        b.rows[3][2] = tc + 2.0 * tl + ts;
    }
    // Row v: residual against the measured per-gate errors, floored at zero.
    const double meas[3] = {in.measured_e_spectator, in.measured_e_line, in.measured_e_target};
    for (int c = 0; c < 3; ++c) {
        b.measured[c] = meas[c];
        if (std::isnan(meas[c])) continue;
        double known = 0.0;
        for (int r = 0; r < 4; ++r) known += b.rows[r][c];
        b.rows[4][c] = std::max(0.0, meas[c] - known);
    }
    return b;
}

namespace {
std::string fmt_row(double v) {
    if (v == 0.0) return "   --  ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%7.2f", v * 1e4);
    return buf;
}
}  // namespace

std::string ErrorBudget::to_text() const {
    static const char* kNames[5] = {
        "i   Spontaneous emission of addressing light",
        "ii  Phase error from fluctuations in f",
        "iii Phase error from microwave fluctuations",
        "iv  Off-resonant microwave transitions",
        "v   Other sources (residual)"};
    std::ostringstream os;
    os << "Error budget (units of 1e-4)                      Spectator    Line   Target\n";
    bool have_meas = false;
    for (double m : measured)
        if (!std::isnan(m)) have_meas = true;
    if (have_meas) {
        os << "    E, measured error per gate               ";
        for (int c = 0; c < 3; ++c)
            os << "  " << (std::isnan(measured[c]) ? "   --  " : fmt_row(measured[c]));
        os << "\n";
    }
    for (int r = 0; r < 5; ++r) {
        os << kNames[r];
        for (std::size_t pad = std::string(kNames[r]).size(); pad < 45; ++pad) os << ' ';
        for (int c = 0; c < 3; ++c) os << "  " << fmt_row(rows[r][c]);
        os << "\n";
    }
    return os.str();
}

std::string ErrorBudget::to_csv() const {
    std::ostringstream os;
    os << "row,spectator,line,target\n";
    static const char* kIds[5] = {"i", "ii", "iii", "iv", "v"};
    for (int r = 0; r < 5; ++r) {
        os << kIds[r];
        for (int c = 0; c < 3; ++c) os << "," << rows[r][c];
        os << "\n";
    }
    return os.str();
}

}  // namespace latgate
