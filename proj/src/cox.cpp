#include "moesurv/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "moesurv/error.hpp"

namespace moesurv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<std::size_t> descending_time_order(std::span<const double> time) {
    std::vector<std::size_t> order(time.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return time[a] > time[b]; });
    return order;
}

void check_inputs(const MatrixXd& x, std::span<const double> time, std::span<const int> event) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (time.size() != n || event.size() != n) throw ConfigError("cox: x, time and event differ in length");
    if (std::none_of(event.begin(), event.end(), [](int e) { return e != 0; }))
        throw ConfigError("cox: at least one event is required");
}

}  // namespace

double cox_log_likelihood(const MatrixXd& x, std::span<const double> time, std::span<const int> event,
                          const VectorXd& beta, double ridge, VectorXd* grad, MatrixXd* information) {
    const Index p = x.cols();
    const VectorXd eta = x * beta;
    const auto order = descending_time_order(time);

    // Risk-set sums are kept relative to a running maximum of eta.
    double shift = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    VectorXd s1 = VectorXd::Zero(p);
    MatrixXd s2 = MatrixXd::Zero(information ? p : 0, information ? p : 0);

    double ll = 0.0;
    if (grad) grad->setZero(p);
    if (information) information->setZero(p, p);

    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t end = k;
        while (end < order.size() && time[order[end]] == time[order[k]]) ++end;
        for (std::size_t m = k; m < end; ++m) {
            const std::size_t i = order[m];
            const double e = eta(static_cast<Index>(i));
            if (e > shift) {
                const double r = std::exp(shift - e);
                s0 *= r;
                s1 *= r;
                if (information) s2 *= r;
                shift = e;
            }
            const double w = std::exp(e - shift);
            const auto xi = x.row(static_cast<Index>(i)).transpose();
            s0 += w;
            s1 += w * xi;
            if (information) s2.noalias() += w * xi * xi.transpose();
        }
        const VectorXd mean = s1 / s0;
        for (std::size_t m = k; m < end; ++m) {
            const std::size_t i = order[m];
            if (!event[i]) continue;
            ll += eta(static_cast<Index>(i)) - shift - std::log(s0);
            if (grad) *grad += x.row(static_cast<Index>(i)).transpose() - mean;
            if (information) *information += s2 / s0 - mean * mean.transpose();
        }
        k = end;
    }
    if (ridge > 0.0) {
        ll -= 0.5 * ridge * beta.squaredNorm();
        if (grad) *grad -= ridge * beta;
        if (information) information->diagonal().array() += ridge;
    }
    return ll;
}

namespace {

struct NewtonResult {
    VectorXd beta;
    double ll = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool diverged = false;
    std::vector<double> trace;
};

NewtonResult newton(const MatrixXd& x, std::span<const double> time, std::span<const int> event, double ridge,
                    const CoxOptions& opt) {
    NewtonResult r;
    r.beta = VectorXd::Zero(x.cols());
    VectorXd grad;
    MatrixXd info;
    r.ll = cox_log_likelihood(x, time, event, r.beta, ridge, &grad, &info);
    r.trace.push_back(r.ll);
    for (;;) {
        r.grad_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
        if (r.grad_norm < opt.tol) return r;
        if (r.iterations >= opt.max_iter)
            throw CoxConvergenceError("cox: no convergence after " + std::to_string(opt.max_iter) +
                                          " iterations (gradient max-norm " + std::to_string(r.grad_norm) + ")",
                                      r.beta, r.grad_norm);
        ++r.iterations;
        const VectorXd step = info.completeOrthogonalDecomposition().solve(grad);
        double scale = 1.0;
        VectorXd next;
        double ll_next = -std::numeric_limits<double>::infinity();
        for (int halving = 0; halving < 60; ++halving, scale *= 0.5) {
            next = r.beta + scale * step;
            ll_next = cox_log_likelihood(x, time, event, next, ridge);
            if (std::isfinite(ll_next) && ll_next >= r.ll) break;
        }
        if (!(std::isfinite(ll_next) && ll_next >= r.ll))
            throw CoxConvergenceError("cox: step-halving failed to improve the partial likelihood", r.beta,
                                      r.grad_norm);
        const bool stalled = ll_next == r.ll && (next - r.beta).norm() == 0.0;
        r.beta = next;
        r.ll = cox_log_likelihood(x, time, event, r.beta, ridge, &grad, &info);
        r.trace.push_back(r.ll);
        if (r.beta.norm() > opt.divergence) {
            r.diverged = true;
            return r;
        }
        if (stalled) {
            r.grad_norm = grad.cwiseAbs().maxCoeff();
            if (r.grad_norm < opt.tol) return r;
            throw CoxConvergenceError("cox: Newton step stalled", r.beta, r.grad_norm);
        }
    }
}

/// Separation leaves the likelihood increasing without bound along beta's
/// direction; a finite optimum falls off sharply far away from it.
bool keeps_rising(const MatrixXd& x, std::span<const double> time, std::span<const int> event,
                  const NewtonResult& r, const CoxOptions& opt) {
    const double norm = r.beta.norm();
    if (norm == 0.0) return false;
    const VectorXd far = r.beta * (2.0 * opt.divergence / norm);
    const double ll_far = cox_log_likelihood(x, time, event, far);
    return ll_far >= r.ll - 1e-9 * std::max(1.0, std::abs(r.ll));
}

void fill_baseline(CoxModel& m, const MatrixXd& x, std::span<const double> time, std::span<const int> event) {
    const VectorXd eta = x * m.beta;
    const auto order = descending_time_order(time);
    std::vector<std::pair<double, double>> increments;  // (time, d / risk-set sum), descending time
    double shift = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t end = k;
        int deaths = 0;
        while (end < order.size() && time[order[end]] == time[order[k]]) {
            const double e = eta(static_cast<Index>(order[end]));
            if (e > shift) {
                s0 *= std::exp(shift - e);
                shift = e;
            }
            s0 += std::exp(e - shift);
            deaths += event[order[end]] ? 1 : 0;
            ++end;
        }
        if (deaths > 0) increments.emplace_back(time[order[k]], deaths * std::exp(-shift - std::log(s0)));
        k = end;
    }
    std::reverse(increments.begin(), increments.end());
    double acc = 0.0;
    for (const auto& [t, inc] : increments) {
        acc += inc;
        m.event_times.push_back(t);
        m.cumulative.push_back(acc);
    }
}

}  // namespace

double CoxModel::baseline(double t) const {
    const auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
    if (it == event_times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(it - event_times.begin() - 1)];
}

CoxModel fit_cox(const MatrixXd& x, std::span<const double> time, std::span<const int> event,
                 const CoxOptions& options) {
    check_inputs(x, time, event);
    // Constant columns cancel out of every risk-set ratio; they are pinned at 0.
    std::vector<Index> active;
    for (Index j = 0; j < x.cols(); ++j)
        if (x.rows() > 0 && x.col(j).maxCoeff() > x.col(j).minCoeff()) active.push_back(j);
    MatrixXd xa(x.rows(), static_cast<Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) xa.col(static_cast<Index>(k)) = x.col(active[k]);

    NewtonResult r = newton(xa, time, event, 0.0, options);
    CoxModel m;
    if (r.diverged || keeps_rising(xa, time, event, r, options)) {
        m.ridge_fallback = true;
        m.warnings.push_back("cox: partial likelihood has no finite maximum (separation); refit with ridge penalty " +
                             format_double(options.ridge));
        r = newton(xa, time, event, options.ridge, options);
    }
    m.beta = VectorXd::Zero(x.cols());
    for (std::size_t k = 0; k < active.size(); ++k) m.beta(active[k]) = r.beta(static_cast<Index>(k));
    m.log_likelihood = cox_log_likelihood(x, time, event, m.beta);
    m.iterations = r.iterations;
    m.trace = std::move(r.trace);
    fill_baseline(m, x, time, event);
    return m;
}

CoxModel fit_cox(const SurvivalSet& train, const CoxOptions& options) {
    return fit_cox(train.x, train.durations, train.events, options);
}

double cox_risk(const CoxModel& model, std::span<const double> x) {
    if (static_cast<Index>(x.size()) != model.beta.size()) throw ConfigError("cox_risk: feature length mismatch");
    double r = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) r += x[j] * model.beta(static_cast<Index>(j));
    return r;
}

std::vector<double> cox_risks(const CoxModel& model, const MatrixXd& x) {
    if (x.cols() != model.beta.size()) throw ConfigError("cox_risk: feature length mismatch");
    const VectorXd eta = x * model.beta;
    return {eta.data(), eta.data() + eta.size()};
}

HazardCurve cox_survival_curve(const CoxModel& model, std::span<const double> x, const DiscretizationGrid& grid) {
    if (!model.has_baseline()) throw UsageError("cox_survival_curve: model has no baseline hazard");
    const double rel = std::exp(cox_risk(model, x));
    std::vector<double> s;
    for (double edge : grid.bin_upper_edges()) s.push_back(std::exp(-model.baseline(edge) * rel));
    return HazardCurve::from_survival(s);
}

}  // namespace moesurv
