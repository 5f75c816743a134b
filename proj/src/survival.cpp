#include "moesurv/survival.hpp"

namespace moesurv {

HazardCurve HazardCurve::from_hazards(std::span<const double> hazard) {
    HazardCurve c;
    c.hazard.assign(hazard.begin(), hazard.end());
    double s_prev = 1.0;
    for (double h : hazard) {
        c.event_mass.push_back(h * s_prev);
        s_prev *= (1.0 - h);
        c.survival.push_back(s_prev);
    }
    return c;
}

HazardCurve HazardCurve::from_survival(std::span<const double> survival) {
    HazardCurve c;
    c.survival.assign(survival.begin(), survival.end());
    double s_prev = 1.0;
    for (double s : survival) {
        c.hazard.push_back(s_prev > 0.0 ? 1.0 - s / s_prev : 1.0);
        c.event_mass.push_back(s_prev - s);
        s_prev = s;
    }
    return c;
}

Eigen::MatrixXd survival_from_hazards(const Eigen::MatrixXd& hazard) {
    Eigen::MatrixXd s(hazard.rows(), hazard.cols());
    for (Eigen::Index r = 0; r < hazard.rows(); ++r) {
        double acc = 1.0;
        for (Eigen::Index t = 0; t < hazard.cols(); ++t) s(r, t) = acc *= (1.0 - hazard(r, t));
    }
    return s;
}

}  // namespace moesurv
