#pragma once

// Cox proportional hazards fit by Newton-Raphson on the Breslow partial
// likelihood, with a Breslow cumulative baseline hazard for survival curves.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "moesurv/data.hpp"
#include "moesurv/survival.hpp"

namespace moesurv {

struct CoxOptions {
    int max_iter = 100;
    double tol = 1e-6;          ///< on the gradient max-norm
    double ridge = 1e-4;        ///< penalty used after separation is detected
    double divergence = 1e3;    ///< ||beta|| treated as diverging
};

struct CoxModel {
    Eigen::VectorXd beta;
    std::vector<double> event_times;   ///< distinct event times, ascending
    std::vector<double> cumulative;    ///< Breslow Lambda_0 at each event time
    double log_likelihood = 0.0;
    int iterations = 0;
    bool ridge_fallback = false;
    std::vector<double> trace;  ///< penalized log-likelihood after each accepted step
    std::vector<std::string> warnings;

    bool has_baseline() const { return !event_times.empty(); }
    /// Lambda_0(t): step function, 0 before the first event time.
    double baseline(double t) const;
};

class CoxConvergenceError : public std::runtime_error {
public:
    CoxConvergenceError(const std::string& what, Eigen::VectorXd beta, double grad_norm)
        : std::runtime_error(what), beta_(std::move(beta)), grad_norm_(grad_norm) {}
    const Eigen::VectorXd& beta() const noexcept { return beta_; }
    double grad_norm() const noexcept { return grad_norm_; }

private:
    Eigen::VectorXd beta_;
    double grad_norm_;
};

/// Breslow log partial likelihood minus (ridge/2)||beta||^2. Optionally
/// returns its gradient and the negative Hessian (information matrix).
double cox_log_likelihood(const Eigen::MatrixXd& x, std::span<const double> time, std::span<const int> event,
                          const Eigen::VectorXd& beta, double ridge = 0.0, Eigen::VectorXd* grad = nullptr,
                          Eigen::MatrixXd* information = nullptr);

/// Throws ConfigError without events, CoxConvergenceError when the gradient
/// does not fall below tol within max_iter.
CoxModel fit_cox(const Eigen::MatrixXd& x, std::span<const double> time, std::span<const int> event,
                 const CoxOptions& options = {});
/// Fits on the continuous durations of a prepared set.
CoxModel fit_cox(const SurvivalSet& train, const CoxOptions& options = {});

double cox_risk(const CoxModel& model, std::span<const double> x);
std::vector<double> cox_risks(const CoxModel& model, const Eigen::MatrixXd& x);

/// S(t|x) = exp(-Lambda_0(edge_t) exp(x'beta)) at each bin's upper edge.
/// Throws UsageError when the model has no baseline.
HazardCurve cox_survival_curve(const CoxModel& model, std::span<const double> x, const DiscretizationGrid& grid);

}  // namespace moesurv
