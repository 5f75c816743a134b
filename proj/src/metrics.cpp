#include "moesurv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "moesurv/error.hpp"

namespace moesurv {

namespace {

void check_lengths(std::size_t n, std::span<const int> times, std::span<const int> events) {
    if (times.size() != n || events.size() != n)
        throw ConfigError("concordance: risk, time and event vectors differ in length");
}

double credit(double ri, double rj) {
    if (std::abs(ri - rj) <= kRiskTieTolerance) return 0.5;
    return ri > rj ? 1.0 : 0.0;
}

ConcordanceResult finish(long long pairs, double concordant, const char* what) {
    if (pairs == 0) throw UndefinedMetricError(std::string(what) + ": no comparable pairs");
    return ConcordanceResult{concordant / static_cast<double>(pairs), pairs, concordant};
}

}  // namespace

ConcordanceResult harrell_cindex(std::span<const double> risk, std::span<const int> times,
                                 std::span<const int> events) {
    check_lengths(risk.size(), times, events);
    long long pairs = 0;
    double concordant = 0.0;
    for (std::size_t i = 0; i < risk.size(); ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < risk.size(); ++j) {
            if (times[i] < times[j] || (times[i] == times[j] && !events[j] && j != i)) {
                ++pairs;
                concordant += credit(risk[i], risk[j]);
            }
        }
    }
    return finish(pairs, concordant, "harrell_cindex");
}

double model_risk_score(const HazardCurve& curve) {
    double s = 0.0;
    for (double v : curve.survival) s += v;
    return -s;
}

std::vector<double> model_risk_scores(std::span<const HazardCurve> curves) {
    std::vector<double> out;
    out.reserve(curves.size());
    for (const auto& c : curves) out.push_back(model_risk_score(c));
    return out;
}

ConcordanceResult td_cindex_from_risk(std::span<const double> risk, std::span<const int> times,
                                      std::span<const int> events, int horizon) {
    check_lengths(risk.size(), times, events);
    long long pairs = 0;
    double concordant = 0.0;
    for (std::size_t i = 0; i < risk.size(); ++i) {
        if (!events[i] || times[i] > horizon) continue;
        for (std::size_t j = 0; j < risk.size(); ++j) {
            if (times[j] > times[i]) {
                ++pairs;
                concordant += credit(risk[i], risk[j]);
            }
        }
    }
    return finish(pairs, concordant, "td_cindex");
}

ConcordanceResult td_cindex(std::span<const HazardCurve> curves, std::span<const int> times,
                            std::span<const int> events, int horizon) {
    std::vector<double> risk;
    risk.reserve(curves.size());
    for (const auto& c : curves) {
        if (horizon < 0 || horizon > c.max_bin())
            throw ConfigError("td_cindex: horizon " + std::to_string(horizon) + " outside the curve");
        risk.push_back(1.0 - c.survival[static_cast<std::size_t>(horizon)]);
    }
    return td_cindex_from_risk(risk, times, events, horizon);
}

std::vector<double> default_percentiles() {
    std::vector<double> p;
    for (int k = 1; k <= 9; ++k) p.push_back(k / 10.0);
    return p;
}

HorizonGrid fit_horizons(std::span<const int> times, std::span<const int> events,
                         std::span<const double> percentiles) {
    if (times.size() != events.size()) throw ConfigError("fit_horizons: time and event vectors differ in length");
    std::vector<double> ev;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (events[i]) ev.push_back(times[i]);
    if (ev.empty()) throw UndefinedMetricError("fit_horizons: no events");
    std::sort(ev.begin(), ev.end());
    HorizonGrid grid;
    for (double p : percentiles) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("fit_horizons: percentile outside [0, 1]");
        const double pos = p * static_cast<double>(ev.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, ev.size() - 1);
        const double q = ev[lo] + (pos - static_cast<double>(lo)) * (ev[hi] - ev[lo]);
        grid.percentiles.push_back(p);
        grid.bins.push_back(static_cast<int>(std::floor(q + 1e-9)));
    }
    return grid;
}

}  // namespace moesurv
