#include "moesurv/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "moesurv/error.hpp"

namespace moesurv {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

void check_targets(std::size_t n, std::span<const int> bins, std::span<const int> events, Index n_bins) {
    if (bins.size() != n || events.size() != n)
        throw ConfigError("loss: " + std::to_string(n) + " predictions but " + std::to_string(bins.size()) +
                          " bins and " + std::to_string(events.size()) + " events");
    for (std::size_t i = 0; i < n; ++i)
        if (bins[i] < 0 || bins[i] >= n_bins)
            throw ConfigError("loss: bin " + std::to_string(bins[i]) + " outside 0.." + std::to_string(n_bins - 1));
}

double record_nll(std::span<const double> hazard, int bin, int event) {
    double s_prev = 1.0;
    for (int t = 0; t < bin; ++t) s_prev *= 1.0 - hazard[static_cast<std::size_t>(t)];
    const double h = hazard[static_cast<std::size_t>(bin)];
    const double lik = event ? h * s_prev : (1.0 - h) * s_prev;
    return -std::log(std::max(lik, kProbabilityFloor));
}

}  // namespace

BatchRoutingStats BatchRoutingStats::from_batch(const MatrixXd& pi_feat, const MatrixXd& pi_haz, Index bins) {
    const Index b = pi_feat.rows();
    if (b == 0 || pi_haz.rows() != b * bins) throw ConfigError("routing stats: inconsistent batch shapes");
    BatchRoutingStats s;
    s.pi_bar_feat = pi_feat.colwise().mean();
    s.pi_bar_haz = MatrixXd::Zero(bins, pi_haz.cols());
    for (Index i = 0; i < b; ++i) s.pi_bar_haz += pi_haz.middleRows(i * bins, bins);
    s.pi_bar_haz /= static_cast<double>(b);
    return s;
}

double nll_loss(std::span<const HazardCurve> curves, std::span<const int> bins, std::span<const int> events) {
    if (curves.empty()) throw UsageError("nll_loss on an empty batch");
    check_targets(curves.size(), bins, events, static_cast<Index>(curves.front().hazard.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < curves.size(); ++i) acc += record_nll(curves[i].hazard, bins[i], events[i]);
    return acc / static_cast<double>(curves.size());
}

double nll_loss(const MatrixXd& hazard, std::span<const int> bins, std::span<const int> events) {
    if (hazard.rows() == 0) throw UsageError("nll_loss on an empty batch");
    check_targets(static_cast<std::size_t>(hazard.rows()), bins, events, hazard.cols());
    std::vector<double> row(static_cast<std::size_t>(hazard.cols()));
    double acc = 0.0;
    for (Index i = 0; i < hazard.rows(); ++i) {
        for (Index t = 0; t < hazard.cols(); ++t) row[static_cast<std::size_t>(t)] = hazard(i, t);
        acc += record_nll(row, bins[static_cast<std::size_t>(i)], events[static_cast<std::size_t>(i)]);
    }
    return acc / static_cast<double>(hazard.rows());
}

double lb_feat_loss(const Eigen::RowVectorXd& pi_bar, double alpha) {
    const auto k = static_cast<double>(pi_bar.size());
    return alpha * (k * pi_bar.squaredNorm() - 1.0);
}

double lb_haz_loss(const MatrixXd& pi_bar, double beta) {
    const auto l = static_cast<double>(pi_bar.cols());
    return beta * (l * pi_bar.squaredNorm() / static_cast<double>(pi_bar.rows()) - 1.0);
}

LossBreakdown total_loss(const MatrixXd& hazard, std::span<const int> bins, std::span<const int> events,
                         const BatchRoutingStats& stats, const DualMoeConfig& config) {
    LossBreakdown out;
    out.nll = nll_loss(hazard, bins, events);
    out.lb_feat = config.feature_moe ? lb_feat_loss(stats.pi_bar_feat, config.alpha) : 0.0;
    out.lb_haz = config.hazard_moe ? lb_haz_loss(stats.pi_bar_haz, config.beta) : 0.0;
    out.total = out.nll + out.lb_feat + out.lb_haz;
    return out;
}

namespace ad {

Var nll_loss(Var hazard, std::span<const int> bins, std::span<const int> events) {
    if (hazard.rows() == 0) throw UsageError("nll_loss on an empty batch");
    check_targets(static_cast<std::size_t>(hazard.rows()), bins, events, hazard.cols());
    Graph& g = *hazard.graph();
    MatrixXd d(hazard.rows(), 1);
    for (Index i = 0; i < d.rows(); ++i) d(i, 0) = events[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    Var survival = cumprod_rows(add_scalar(-hazard, 1.0));
    Var mass = hazard * shift_right(survival, 1.0);
    Var observed = gather_cols(mass, bins);
    Var censored = gather_cols(survival, bins);
    Var delta = g.constant(d);
    Var lik = delta * observed + (g.scalar(1.0) - delta) * censored;
    return -mean(log(clamp_min(lik, kProbabilityFloor)));
}

Var lb_feat_loss(Var pi_feat, double alpha) {
    const auto k = static_cast<double>(pi_feat.cols());
    return scale(add_scalar(scale(sum(square(mean_cols(pi_feat))), k), -1.0), alpha);
}

Var lb_haz_loss(Var pi_haz, Index bins, double beta) {
    if (bins <= 0 || pi_haz.rows() % bins != 0) throw ConfigError("lb_haz_loss: rows not a multiple of bins");
    const Index b = pi_haz.rows() / bins;
    MatrixXd avg = MatrixXd::Zero(bins, pi_haz.rows());
    for (Index i = 0; i < b; ++i) avg.middleCols(i * bins, bins).diagonal().setConstant(1.0 / static_cast<double>(b));
    Var pi_bar = matmul(pi_haz.graph()->constant(std::move(avg)), pi_haz);
    const double l = static_cast<double>(pi_haz.cols());
    return scale(add_scalar(scale(sum(square(pi_bar)), l / static_cast<double>(bins)), -1.0), beta);
}

LossBreakdown LossTerms::values() const {
    return LossBreakdown{nll.item(), lb_feat.item(), lb_haz.item(), total.item()};
}

LossTerms total_loss(const ForwardResult& out, std::span<const int> bins, std::span<const int> events,
                     const DualMoeConfig& config) {
    Graph& g = *out.hazard.graph();
    LossTerms t;
    t.nll = nll_loss(out.hazard, bins, events);
    t.lb_feat = config.feature_moe ? lb_feat_loss(out.pi_feat, config.alpha) : g.scalar(0.0);
    t.lb_haz = config.hazard_moe ? lb_haz_loss(out.pi_haz, out.hazard.cols(), config.beta) : g.scalar(0.0);
    t.total = t.nll + t.lb_feat + t.lb_haz;
    return t;
}

}  // namespace ad

}  // namespace moesurv
