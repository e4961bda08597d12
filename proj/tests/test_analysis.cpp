#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "latgate/analysis.hpp"
#include "latgate/rng.hpp"

using namespace latgate;

TEST_CASE("fringe fit: noiseless round trip and contrast recovery") {
    auto make = [](double n, double theta, double phi, double maxp, double minp) {
        std::vector<double> alpha, p1;
        for (int i = 0; i < 24; ++i) {
            const double a = kTwoPi * i / 24.0;
            alpha.push_back(a);
            const double y = n * n * (1.0 + std::sin(theta) * std::cos(a + phi)) / 2.0;
            p1.push_back(minp + (maxp - minp) * y);
        }
        return std::pair(alpha, p1);
    };
    {
        auto [alpha, p1] = make(1.0, 0.5 * kPi, 0.5 * kPi, 1.0, 0.0);
        const FringeFit fit = fit_sinusoid(alpha, p1, {1.0, 0.0});
        CHECK(std::abs(fit.n - 1.0) < 1e-6);
        CHECK(std::abs(fit.theta - 0.5 * kPi) < 1e-6);
        CHECK(std::abs(wrap_angle(fit.phi - 0.5 * kPi)) < 1e-6);
        CHECK(fit.residual < 1e-12);
    }
    {
        // Contrast 0.88 synthetic fringe: n^2 sin(theta) recovered.
        auto [alpha, p1] = make(1.0, std::asin(0.88), 0.2, 0.95, 0.01);
        const FringeFit fit = fit_sinusoid(alpha, p1);
        CHECK(fit.n * fit.n * std::sin(fit.theta) == doctest::Approx(0.88).epsilon(1e-6));
    }
    {
        // Flat data: degenerate, flagged.
        std::vector<double> alpha, p1;
        for (int i = 0; i < 8; ++i) {
            alpha.push_back(kTwoPi * i / 8.0);
            p1.push_back(0.4);
        }
        const FringeFit fit = fit_sinusoid(alpha, p1, {1.0, 0.0});
        CHECK(fit.degenerate);
        CHECK(fit.n * fit.n * std::sin(fit.theta) < 1e-6);
    }
    CHECK_THROWS_AS(fit_sinusoid(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 2}),
                    std::domain_error);
}

TEST_CASE("fidelity estimator") {
    CHECK(fidelity_from_p1(1.0).f2 == 1.0);
    CHECK(fidelity_from_p1(0.25).f2 == doctest::Approx(0.5));
    CHECK(fidelity_from_p1(0.0).one_sided);
    CHECK_THROWS_AS(fidelity_from_p1(1.5), std::domain_error);
    // sigma propagation: sigma(F2) = sigma(p1) / (2 sqrt(p1)).
    const FidelityEstimate e = fidelity_from_p1(0.81, 0.02);
    CHECK(e.sigma == doctest::Approx(0.02 / 1.8));
    // For an equator state with a pure phase error, P1 after an ideal-phase
    // detection is (1 + cos(err))/2 and sqrt(P1) is the estimator value.
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double err = 0.3 * rng.uniform();
        const double p1 = 0.5 * (1.0 + std::cos(err));
        CHECK(fidelity_from_p1(p1).f2 == doctest::Approx(std::sqrt(p1)).epsilon(1e-12));
        CHECK(p1 == doctest::Approx(std::pow(std::cos(0.5 * err), 2)).epsilon(1e-12));
    }
}

namespace {

std::vector<RBRecord> synthetic_rb(double e2, double d_if, const std::vector<int>& lengths,
                                   int n_seq, int shots, std::uint64_t seed) {
    std::vector<RBRecord> recs;
    Rng rng(seed, 0x5E9);
    for (int l : lengths) {
        RBRecord r;
        r.length = l;
        const double p = rb_model(l, e2, d_if);
        for (int s = 0; s < n_seq; ++s) {
            int bright = 0;
            for (int k = 0; k < shots; ++k) bright += rng.bernoulli(p);
            r.per_sequence.push_back(static_cast<double>(bright) / shots);
        }
        const MeanStdErr m = mean_std_err(r.per_sequence);
        r.mean_p1 = m.mean;
        r.std_err = m.std_err;
        recs.push_back(std::move(r));
    }
    return recs;
}

}  // namespace

TEST_CASE("rb fit: generator round trips") {
    const std::vector<int> lengths = {1, 2, 4, 6, 8, 12, 16, 24};
    {
        // Target-style fit with d_if fixed.
        const auto recs = synthetic_rb(55e-4, 0.1128, lengths, 9, 100, 11);
        const RBFit fit = fit_rb(recs, 0.1128, 200, 5);
        CHECK(std::abs(fit.e2 - 55e-4) <= 2.0 * fit.e2_sigma);
        CHECK(fit.d_if == 0.1128);
        CHECK(fit.d_if_fixed);
    }
    {
        // Non-target-style fit with d_if floated.
        const auto recs = synthetic_rb(34e-4, 1.1e-2, lengths, 12, 400, 12);
        const RBFit fit = fit_rb(recs, std::nullopt, 200, 6);
        CHECK(std::abs(fit.e2 - 34e-4) <= 2.5 * fit.e2_sigma);
        CHECK(std::abs(fit.d_if - 1.1e-2) <= 2.5 * std::max(fit.d_if_sigma, 1e-3));
    }
    {
        // Zero decay: flat line at 1 - d/2, flagged as non-decaying.
        std::vector<RBRecord> recs;
        for (int l : lengths) recs.push_back({l, 0, rb_model(l, 0.0, 0.1), 0.0, {}});
        const RBFit fit = fit_rb(recs, std::nullopt, 50, 7);
        CHECK(fit.e2 < 1e-6);
        CHECK(fit.non_decaying);
        CHECK(fit.d_if == doctest::Approx(0.1).epsilon(1e-3));
    }
    CHECK_THROWS_AS(fit_rb(std::vector<RBRecord>{{1, 0, 0.9, 0.0, {}}}), std::domain_error);
}

TEST_CASE("rb fit estimator is unbiased over replications") {
    const std::vector<int> lengths = {1, 2, 4, 8, 16, 32};
    const double truth = 55e-4;
    double acc = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const auto recs = synthetic_rb(truth, 0.1128, lengths, 9, 100, 1000 + r);
        acc += fit_rb(recs, 0.1128, 0, 1).e2;
    }
    const double mean = acc / reps;
    // sigma(E2) per replication ~ 6e-4 => SE over 200 ~ 4e-5.
    CHECK(std::abs(mean - truth) < 1.5e-4);
}

TEST_CASE("error decomposition follows the published algebra exactly") {
    const auto d = decompose_errors({55e-4, 16e-4}, {34e-4, 4e-4}, {63e-4, 9e-4});
    CHECK(d.e_s.value == doctest::Approx(17e-4));
    CHECK(d.e_t.value == doctest::Approx(38e-4));
    CHECK(d.e_l.value == doctest::Approx(46e-4));
    CHECK(d.e_s.sigma == doctest::Approx(2e-4));
    CHECK(d.e_t.sigma == doctest::Approx(std::hypot(16e-4, 2e-4)));
    const auto zero = decompose_errors({0, 0}, {0, 0}, {0, 0});
    CHECK(zero.e_t.value == 0.0);
    CHECK(zero.e_s.value == 0.0);
    CHECK(zero.e_l.value == 0.0);
    // Negative results are reported, not clipped.
    const auto neg = decompose_errors({1e-4, 0}, {34e-4, 0}, {63e-4, 0});
    CHECK(neg.e_t.value < 0.0);
}

TEST_CASE("error decomposition: sigma propagation matches Monte Carlo") {
    Rng rng(99);
    const ValueWithSigma e2t{55e-4, 16e-4}, e2s{34e-4, 4e-4}, e2l{63e-4, 9e-4};
    double acc = 0.0, acc2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double t = rng.normal(e2t.value, e2t.sigma);
        const double s = rng.normal(e2s.value, e2s.sigma);
        const double et = t - 0.5 * s;
        acc += et;
        acc2 += et * et;
    }
    const double sd = std::sqrt(acc2 / n - (acc / n) * (acc / n));
    const auto d = decompose_errors(e2t, e2s, e2l);
    CHECK(d.e_t.sigma == doctest::Approx(sd).epsilon(0.02));
}

TEST_CASE("crosstalk average") {
    const auto x = crosstalk_average({17e-4, 2e-4}, {46e-4, 9e-4}, 107, 16);
    CHECK(x.value == doctest::Approx(20.77e-4).epsilon(1e-3));
    CHECK(std::abs(x.value - 21e-4) < 0.5e-4);
    CHECK(crosstalk_average({5e-4, 0}, {5e-4, 0}, 10, 20).value == doctest::Approx(5e-4));
    CHECK(crosstalk_average({7e-4, 0}, {99.0, 0}, 50, 0).value == doctest::Approx(7e-4));
    CHECK_THROWS_AS(crosstalk_average({1, 0}, {1, 0}, 0, 0), std::domain_error);
}

TEST_CASE("crosstalk algebra property: random inputs match symbolic evaluation") {
    Rng rng(123);
    for (int i = 0; i < 200; ++i) {
        const double es = rng.uniform(), el = rng.uniform();
        const int ns = 1 + static_cast<int>(rng.below(200));
        const int nl = static_cast<int>(rng.below(200));
        const auto x = crosstalk_average({es, 0}, {el, 0}, ns, nl);
        CHECK(x.value == doctest::Approx((ns * es + nl * el) / (ns + nl)).epsilon(1e-12));
        const auto d = decompose_errors({rng.uniform(), 0}, {2.0 * es, 0}, {el, 0});
        CHECK(d.e_s.value == doctest::Approx(es).epsilon(1e-12));
        CHECK(d.e_l.value == doctest::Approx(el - es).epsilon(1e-12));
    }
}

TEST_CASE("gaussian peak fits recover synthetic centers and the cross ratio") {
    std::vector<SpectrumRecord> recs;
    const double f = 51.2e3;
    Rng rng(4);
    for (double d = -10e3; d <= 110e3; d += 1.2e3) {
        auto g = [&](double c, double w) { return std::exp(-0.5 * (d - c) * (d - c) / (w * w)); };
        recs.push_back({d, 0, 0.8 * g(0.0, 3e3)});
        recs.push_back({d, 1, 0.7 * g(f, 3.5e3)});
        recs.push_back({d, 2, 0.6 * g(1.8 * f, 4e3)});
    }
    const auto peaks = fit_gaussians(recs);
    REQUIRE(peaks.size() == 3);
    CHECK(std::abs(peaks[0].center_hz) < 50.0);
    CHECK(peaks[1].center_hz == doctest::Approx(f).epsilon(1e-3));
    CHECK(peaks[2].center_hz == doctest::Approx(1.8 * f).epsilon(1e-3));
    const auto cal = calibrate_from_peaks(peaks);
    CHECK(cal.k_hat == doctest::Approx(1.8).epsilon(0.01));
    CHECK(peaks[1].width_hz == doctest::Approx(3.5e3).epsilon(0.02));
}

TEST_CASE("budget rows against the published table") {
    BudgetInputs in;
    in.f_hz = 51.2e3;
    in.k = 1.8;
    in.delta_op_hz = 78.54e3;
    in.omega = kTwoPi * 7.96e3;
    in.curvature = 21.0;
    const ErrorBudget b = assemble_budget(in);
    // Row i from the exposure accounting.
    CHECK(b.rows[0][1] == doctest::Approx(8.0e-4).epsilon(0.02));
    CHECK(b.rows[0][2] == doctest::Approx(15.2e-4).epsilon(0.02));
    CHECK(b.rows[0][0] == 0.0);
    // Row ii: Gaussian-averaged sin^2(curv X^2 / 2) = 3 curv^2 sigma^4 / 4.
    CHECK(b.rows[1][2] == doctest::Approx(0.75 * 21.0 * 21.0 * std::pow(0.02, 4)).epsilon(1e-6));
    CHECK(b.rows[1][2] == doctest::Approx(0.7e-4).epsilon(0.25));
    // Row iii: (3e-3 * pi/2)^2 ~ 0.22e-4.
    CHECK(b.rows[2][2] == doctest::Approx(0.222e-4).epsilon(0.01));
    // Row iv: per-stage transfer sums at the operating point.
    CHECK(b.rows[3][1] > 0.0);
    CHECK(b.rows[3][2] > b.rows[3][1] * 0.5);
    // All noise off: computed rows vanish.
    BudgetInputs off = in;
    off.noise = NoiseConfig::all_off();
    off.omega = 0.0;
    const ErrorBudget b0 = assemble_budget(off);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) CHECK(b0.rows[r][c] == 0.0);
    // Row v is the residual against the measured errors, floored at zero.
    BudgetInputs meas = in;
    meas.measured_e_spectator = 17e-4;
    meas.measured_e_line = 46e-4;
    meas.measured_e_target = 38e-4;
    const ErrorBudget bm = assemble_budget(meas);
    CHECK(bm.rows[4][0] == doctest::Approx(17e-4));  // only global microwave error
    CHECK(bm.rows[4][1] == doctest::Approx(46e-4 - bm.rows[0][1] - bm.rows[3][1]));
    CHECK(bm.rows[4][2] >= 0.0);
    const std::string text = bm.to_text();
    CHECK(text.find("Spectator") != std::string::npos);
    CHECK(text.find("Other sources") != std::string::npos);
}

TEST_CASE("rb model sanity") {
    CHECK(rb_model(0, 55e-4, 0.1) == doctest::Approx(0.95));
    CHECK(rb_model(1, 0.0, 0.0) == 1.0);
    // l-independence at zero error.
    CHECK(rb_model(50, 0.0, 0.2) == rb_model(1, 0.0, 0.2));
}
