#pragma once

// Training objective: discrete-time negative log-likelihood plus the
// feature- and hazard-router load-balancing penalties.
//
//   nll     = mean_i -[ d_i log p(tau_i) + (1 - d_i) log S(tau_i) ]
//   lb_feat = alpha ( K sum_k pbar_k^2 - 1 )
//   lb_haz  = beta ( mean_t L sum_l pbar_{t,l}^2 - 1 )
//
// Probabilities are clamped at 1e-12 before the logarithm. Each function
// exists twice: on plain values for reporting and as a graph for training.

#include <span>

#include <Eigen/Core>

#include "moesurv/autodiff.hpp"
#include "moesurv/model.hpp"
#include "moesurv/survival.hpp"

namespace moesurv {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossBreakdown {
    double nll = 0.0;
    double lb_feat = 0.0;
    double lb_haz = 0.0;
    double total = 0.0;
};

/// Batch-mean routing probabilities.
struct BatchRoutingStats {
    Eigen::RowVectorXd pi_bar_feat;  ///< K
    Eigen::MatrixXd pi_bar_haz;      ///< (max_bin+1) x L

    /// `pi_feat` is B x K; `pi_haz` is (B*T) x L with row i*T + t.
    static BatchRoutingStats from_batch(const Eigen::MatrixXd& pi_feat, const Eigen::MatrixXd& pi_haz,
                                        Eigen::Index bins);
};

double nll_loss(std::span<const HazardCurve> curves, std::span<const int> bins, std::span<const int> events);
/// Same, with hazards as rows of a B x T matrix.
double nll_loss(const Eigen::MatrixXd& hazard, std::span<const int> bins, std::span<const int> events);
double lb_feat_loss(const Eigen::RowVectorXd& pi_bar, double alpha);
double lb_haz_loss(const Eigen::MatrixXd& pi_bar, double beta);
/// MoE terms are exactly 0 when the corresponding stage is disabled.
LossBreakdown total_loss(const Eigen::MatrixXd& hazard, std::span<const int> bins, std::span<const int> events,
                         const BatchRoutingStats& stats, const DualMoeConfig& config);

namespace ad {

Var nll_loss(Var hazard, std::span<const int> bins, std::span<const int> events);
/// `pi_feat` is B x K.
Var lb_feat_loss(Var pi_feat, double alpha);
/// `pi_haz` is (B*bins) x L with row i*bins + t.
Var lb_haz_loss(Var pi_haz, Eigen::Index bins, double beta);

struct LossTerms {
    Var nll;
    Var lb_feat;
    Var lb_haz;
    Var total;

    LossBreakdown values() const;
};

LossTerms total_loss(const ForwardResult& out, std::span<const int> bins, std::span<const int> events,
                     const DualMoeConfig& config);

}  // namespace ad

}  // namespace moesurv
