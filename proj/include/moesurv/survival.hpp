#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace moesurv {

/// Discrete-time hazard curve over bins 0..max_bin:
///   S(t) = prod_{t' <= t} (1 - hazard(t')),  S(-1) = 1
///   p(t) = hazard(t) * S(t-1)
struct HazardCurve {
    std::vector<double> hazard;
    std::vector<double> survival;
    std::vector<double> event_mass;

    static HazardCurve from_hazards(std::span<const double> hazard);
    /// Inverse construction from a non-increasing survival curve in [0, 1];
    /// hazard(t) = 1 - S(t)/S(t-1), and 1 once S(t-1) reaches 0.
    static HazardCurve from_survival(std::span<const double> survival);

    int max_bin() const { return static_cast<int>(hazard.size()) - 1; }
};

/// Row-wise survival S(t) = cumprod(1 - hazard) for a B x (T+1) hazard matrix.
Eigen::MatrixXd survival_from_hazards(const Eigen::MatrixXd& hazard);

}  // namespace moesurv
