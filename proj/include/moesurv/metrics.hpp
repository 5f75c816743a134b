#pragma once

// Concordance metrics for right-censored data on discretized times.

#include <span>
#include <vector>

#include "moesurv/survival.hpp"

namespace moesurv {

inline constexpr double kRiskTieTolerance = 1e-12;

struct ConcordanceResult {
    double value = 0.0;
    long long comparable_pairs = 0;
    double concordant = 0.0;  ///< risk ties count 0.5
};

/// Harrell's C. (i, j) is comparable when d_i = 1 and either t_i < t_j, or
/// t_i == t_j with j censored. Higher risk should fail first.
/// Throws UndefinedMetricError when nothing is comparable.
ConcordanceResult harrell_cindex(std::span<const double> risk, std::span<const int> times,
                                 std::span<const int> events);

/// -sum_t S(t): negative expected discrete survival time.
double model_risk_score(const HazardCurve& curve);
std::vector<double> model_risk_scores(std::span<const HazardCurve> curves);

/// Concordance at horizon h with risk 1 - S(h). (i, j) is comparable when
/// d_i = 1, t_i <= h and t_j > t_i. No censoring weights.
ConcordanceResult td_cindex(std::span<const HazardCurve> curves, std::span<const int> times,
                            std::span<const int> events, int horizon);
/// Same pair rule with a precomputed horizon risk per subject.
ConcordanceResult td_cindex_from_risk(std::span<const double> risk_at_horizon, std::span<const int> times,
                                      std::span<const int> events, int horizon);

struct HorizonGrid {
    std::vector<double> percentiles;
    std::vector<int> bins;
};

std::vector<double> default_percentiles();  ///< 0.1, 0.2, ..., 0.9

/// Linear-interpolated percentiles of the event times (d = 1), floored to a
/// bin. Throws UndefinedMetricError when there are no events.
HorizonGrid fit_horizons(std::span<const int> times, std::span<const int> events,
                         std::span<const double> percentiles);

}  // namespace moesurv
