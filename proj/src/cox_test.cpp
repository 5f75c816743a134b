#include "doctest.h"

#include <cmath>
#include <vector>

#include "moesurv/cox.hpp"
#include "moesurv/error.hpp"
#include "moesurv/metrics.hpp"
#include "moesurv/rng.hpp"

using namespace moesurv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Simulated {
    MatrixXd x;
    std::vector<double> time;
    std::vector<int> event;
};

/// Exponential times with rate exp(x'beta); optional uniform censoring.
Simulated simulate(std::uint64_t seed, std::size_t n, const VectorXd& beta, double censor_max = 0.0) {
    Rng rng(seed);
    Simulated s;
    s.x.resize(static_cast<Eigen::Index>(n), beta.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < beta.size(); ++j) s.x(static_cast<Eigen::Index>(i), j) = rng.normal();
        const double rate = std::exp(s.x.row(static_cast<Eigen::Index>(i)).dot(beta));
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        const double t = -std::log(u) / rate;
        if (censor_max > 0.0) {
            const double c = rng.uniform(0.0, censor_max);
            s.time.push_back(std::min(t, c));
            s.event.push_back(t <= c);
        } else {
            s.time.push_back(t);
            s.event.push_back(1);
        }
    }
    return s;
}

}  // namespace

TEST_CASE("recovers known coefficients") {
    VectorXd truth(2);
    truth << 1.0, -0.5;
    const Simulated s = simulate(2024, 2000, truth);
    const CoxModel m = fit_cox(s.x, s.time, s.event);
    CHECK(std::abs(m.beta(0) - 1.0) < 0.1);
    CHECK(std::abs(m.beta(1) + 0.5) < 0.1);
    CHECK_FALSE(m.ridge_fallback);
    for (std::size_t i = 1; i < m.trace.size(); ++i) CHECK(m.trace[i] >= m.trace[i - 1] - 1e-9);
}

TEST_CASE("gradient and information against finite differences") {
    VectorXd truth(3);
    truth << 0.4, -0.2, 0.7;
    Simulated s = simulate(5, 150, truth, 2.0);
    s.time[3] = s.time[4];  // exercise a tie
    VectorXd beta(3);
    beta << 0.1, 0.3, -0.2;
    VectorXd grad;
    MatrixXd info;
    cox_log_likelihood(s.x, s.time, s.event, beta, 0.0, &grad, &info);
    const double h = 1e-5;
    for (int j = 0; j < 3; ++j) {
        VectorXd up = beta, down = beta;
        up(j) += h;
        down(j) -= h;
        const double fd = (cox_log_likelihood(s.x, s.time, s.event, up) - cox_log_likelihood(s.x, s.time, s.event, down)) / (2 * h);
        CHECK(std::abs(fd - grad(j)) / std::max(1.0, std::abs(grad(j))) < 1e-5);
        VectorXd gu, gd;
        cox_log_likelihood(s.x, s.time, s.event, up, 0.0, &gu);
        cox_log_likelihood(s.x, s.time, s.event, down, 0.0, &gd);
        const VectorXd column = -(gu - gd) / (2 * h);
        CHECK((column - info.col(j)).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, info.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("perfect separation falls back to a ridge fit") {
    MatrixXd x(8, 1);
    std::vector<double> t;
    std::vector<int> e;
    for (int i = 0; i < 8; ++i) {
        x(i, 0) = i < 4 ? 1.0 : 0.0;
        t.push_back(i + 1.0);
        e.push_back(1);
    }
    const CoxModel m = fit_cox(x, t, e);
    CHECK(m.ridge_fallback);
    CHECK_FALSE(m.warnings.empty());
    CHECK(std::isfinite(m.beta(0)));
    CHECK(m.beta(0) > 0.0);
}

TEST_CASE("zero-variance columns stay at zero") {
    VectorXd truth(1);
    truth << 0.8;
    const Simulated s = simulate(9, 300, truth, 3.0);
    MatrixXd x(s.x.rows(), 2);
    x.col(0) = s.x.col(0);
    x.col(1).setConstant(2.5);
    const CoxModel with = fit_cox(x, s.time, s.event);
    const CoxModel without = fit_cox(s.x, s.time, s.event);
    CHECK(with.beta(1) == 0.0);
    CHECK(with.beta(0) == doctest::Approx(without.beta(0)).epsilon(1e-8));
    CHECK(with.log_likelihood == doctest::Approx(without.log_likelihood).epsilon(1e-10));
}

TEST_CASE("coefficients are invariant to shifting covariates") {
    VectorXd truth(2);
    truth << 0.5, 0.5;
    const Simulated s = simulate(13, 400, truth, 2.0);
    MatrixXd shifted = s.x;
    shifted.col(0).array() += 10.0;
    shifted.col(1).array() -= 3.0;
    const CoxModel a = fit_cox(s.x, s.time, s.event);
    const CoxModel b = fit_cox(shifted, s.time, s.event);
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(a.log_likelihood == doctest::Approx(b.log_likelihood).epsilon(1e-9));
}

TEST_CASE("risk scores") {
    CoxModel m;
    m.beta = VectorXd(2);
    m.beta << 1, -1;
    CHECK(cox_risk(m, std::vector<double>{2, 1}) == 1.0);
    CHECK(cox_risk(m, std::vector<double>{0, 0}) == 0.0);
    m.beta.setZero();
    const std::vector<double> risks = cox_risks(m, MatrixXd::Random(5, 2));
    CHECK(harrell_cindex(risks, std::vector<int>{1, 2, 3, 4, 5}, std::vector<int>{1, 1, 1, 1, 1}).value == 0.5);
}

TEST_CASE("Breslow baseline on a toy data set") {
    MatrixXd x(3, 1);
    x << 0.5, -1.0, 2.0;
    const std::vector<double> t = {1, 2, 3};
    const std::vector<int> e = {1, 1, 0};
    const CoxModel m = fit_cox(x, t, e);
    const double b = m.beta(0);
    const double r1 = std::exp(0.5 * b), r2 = std::exp(-1.0 * b), r3 = std::exp(2.0 * b);
    const double l1 = 1.0 / (r1 + r2 + r3);
    const double l2 = l1 + 1.0 / (r2 + r3);
    CHECK(m.baseline(0.5) == 0.0);
    CHECK(m.baseline(1.0) == doctest::Approx(l1).epsilon(1e-12));
    CHECK(m.baseline(2.5) == doctest::Approx(l2).epsilon(1e-12));
    CHECK(m.baseline(10.0) == doctest::Approx(l2).epsilon(1e-12));
}

TEST_CASE("survival curves") {
    VectorXd truth(1);
    truth << 0.7;
    const Simulated s = simulate(17, 200, truth, 3.0);
    const CoxModel m = fit_cox(s.x, s.time, s.event);
    DiscretizationGrid grid;
    grid.cuts = {0.2, 0.5, 1.0, 2.0};
    const auto edges = grid.bin_upper_edges();

    const HazardCurve base = cox_survival_curve(m, std::vector<double>{0.0}, grid);
    for (std::size_t t = 0; t + 1 < edges.size(); ++t)
        CHECK(base.survival[t] == doctest::Approx(std::exp(-m.baseline(edges[t]))).epsilon(1e-14));

    const HazardCurve low = cox_survival_curve(m, std::vector<double>{-1.0}, grid);
    const HazardCurve high = cox_survival_curve(m, std::vector<double>{1.0}, grid);
    for (std::size_t t = 0; t < high.survival.size(); ++t) CHECK(high.survival[t] <= low.survival[t]);

    CHECK_THROWS_AS(cox_survival_curve(CoxModel{}, std::vector<double>{0.0}, grid), UsageError);
}

TEST_CASE("fit errors") {
    MatrixXd x = MatrixXd::Random(4, 1);
    CHECK_THROWS_AS(fit_cox(x, std::vector<double>{1, 2, 3, 4}, std::vector<int>{0, 0, 0, 0}), ConfigError);
    CoxOptions tight;
    tight.max_iter = 1;
    tight.tol = 1e-300;
    VectorXd truth(1);
    truth << 1.0;
    const Simulated s = simulate(3, 100, truth);
    try {
        fit_cox(s.x, s.time, s.event, tight);
        FAIL("expected non-convergence");
    } catch (const CoxConvergenceError& err) {
        CHECK(err.beta().size() == 1);
        CHECK(err.grad_norm() > 0.0);
    }
}
