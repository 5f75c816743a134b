#pragma once

// Training loop with early stopping, test-split evaluation and the
// multi-seed experiment grid.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "moesurv/cox.hpp"
#include "moesurv/data.hpp"
#include "moesurv/metrics.hpp"
#include "moesurv/model.hpp"
#include "moesurv/objectives.hpp"

namespace moesurv {

enum class StopMetric { CIndex, Nll };
StopMetric parse_stop_metric(const std::string& s);
std::string to_string(StopMetric m);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 128;
    ad::AdamOptions adam;
    int patience = 20;
    int eval_every = 1;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    StopMetric stop_metric = StopMetric::CIndex;

    /// Throws ConfigError (non-positive sizes, patience > epochs, no seeds).
    void validate() const;
    KeyValues to_kv() const;
    /// Keys: epochs, batch_size, lr, beta1, beta2, eps, patience, eval_every,
    /// seeds (list, or `a..b`), stop_metric (cindex | nll).
    static TrainConfig from_kv(const KeyValues& kv);
};

struct EpochLog {
    int epoch = 0;             ///< 1-based
    LossBreakdown loss;        ///< batch-size weighted mean over the epoch
    std::optional<double> val_cindex;
    std::optional<double> val_nll;
};

/// Overall and per-horizon concordance of one model on one split.
struct Evaluation {
    ConcordanceResult overall;
    HorizonGrid horizons;
    std::vector<std::optional<ConcordanceResult>> td;  ///< empty where no pair is comparable
    std::vector<std::string> warnings;
};

/// Horizons come from the event times of `set` itself.
Evaluation evaluate_curves(std::span<const HazardCurve> curves, std::span<const double> overall_risk,
                           const SurvivalSet& set);
Evaluation evaluate_model(const DualMoeModel& model, const SurvivalSet& set);
Evaluation evaluate_cox(const CoxModel& model, const SurvivalSet& set, const DiscretizationGrid& grid);

/// Raised when a mini-batch produces a non-finite loss.
class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(const std::string& what, double last_finite, int epoch, int batch)
        : std::runtime_error(what), last_finite_(last_finite), epoch_(epoch), batch_(batch) {}
    double last_finite_loss() const noexcept { return last_finite_; }
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    double last_finite_;
    int epoch_;
    int batch_;
};

struct RunResult {
    std::uint64_t seed = 0;
    int best_epoch = 0;
    int epochs_run = 0;
    double best_val = 0.0;  ///< stopping metric at best_epoch
    Evaluation test;
    LossBreakdown final_loss;  ///< retained parameters on the full train split
    std::vector<EpochLog> log;
    BatchPrediction test_prediction;  ///< routing traces on the test split
    std::optional<DualMoeModel> model;
    std::optional<CoxModel> cox;
};

/// `model_config.input_dim` of 0 is taken from the data.
RunResult train_one(DualMoeConfig model_config, const TrainConfig& train_config, const PreparedSplit& data,
                    std::uint64_t seed);
RunResult fit_cox_run(const PreparedSplit& data, std::uint64_t seed, const CoxOptions& options = {});

enum class ModelKind { DualMoe, Cox };

struct Variant {
    std::string name;
    ModelKind kind = ModelKind::DualMoe;
    DualMoeConfig model;
    bool anchor = false;  ///< the comparison reference row
};

/// "main": coxph, naive, dual. "moe-components": naive, feature-moe,
/// hazard-moe, dual. "router-input": features_only, time_only, both.
/// Throws UsageError for any other name.
std::vector<Variant> grid_variants(const std::string& grid, const DualMoeConfig& base);
const std::vector<std::string>& grid_names();

struct GridRun {
    std::size_t variant = 0;
    std::uint64_t seed = 0;
    std::optional<RunResult> result;
    std::string error;  ///< set when the run aborted
};

struct MetricSummary {
    std::string metric;              ///< "cindex" or "td_cindex"
    std::optional<double> percentile;
    double mean = 0.0;
    double std = 0.0;  ///< sample std, 0 for a single run
    int n = 0;
};

struct VariantSummary {
    std::string name;
    bool anchor = false;
    int attempted = 0;
    int completed = 0;
    std::vector<MetricSummary> metrics;  ///< cindex first, then td per percentile

    const MetricSummary* find(const std::string& metric, std::optional<double> percentile = {}) const;
    /// Mean td-C-index averaged over horizons.
    double mean_td() const;
};

std::vector<VariantSummary> aggregate(const std::vector<Variant>& variants, const std::vector<GridRun>& runs);

struct GridResult {
    std::vector<Variant> variants;
    std::vector<std::uint64_t> seeds;
    std::vector<GridRun> runs;  ///< variant-major, seeds in order
    std::vector<VariantSummary> summary;
};

using RunCallback = std::function<void(const Variant&, const GridRun&, const PreparedSplit&)>;

/// Runs every (variant, seed) pair on up to `jobs` threads. Results do not
/// depend on `jobs`; the callback may be invoked concurrently.
GridResult run_grid(const RawDataset& raw, const PreprocessOptions& options, const std::vector<Variant>& variants,
                    const TrainConfig& train_config, int jobs = 1, const RunCallback& on_done = {});

}  // namespace moesurv
