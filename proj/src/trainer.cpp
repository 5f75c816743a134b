#include "moesurv/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "moesurv/error.hpp"
#include "moesurv/rng.hpp"

namespace moesurv {

using Eigen::Index;
using Eigen::MatrixXd;

StopMetric parse_stop_metric(const std::string& s) {
    if (s == "cindex") return StopMetric::CIndex;
    if (s == "nll") return StopMetric::Nll;
    throw ConfigError("unknown stop_metric '" + s + "' (expected cindex or nll)");
}

std::string to_string(StopMetric m) { return m == StopMetric::Nll ? "nll" : "cindex"; }

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("train config: " + msg);
    };
    need(epochs >= 1, "epochs must be >= 1");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(eval_every >= 1, "eval_every must be >= 1");
    need(patience >= 0 && patience <= epochs, "patience must lie in [0, epochs]");
    need(!seeds.empty(), "seeds must not be empty");
    need(adam.lr > 0 && std::isfinite(adam.lr), "lr must be positive");
    need(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1, "betas must lie in [0, 1)");
    need(adam.eps > 0, "eps must be positive");
}

KeyValues TrainConfig::to_kv() const {
    KeyValues kv;
    kv.set("epochs", std::to_string(epochs));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("lr", format_double(adam.lr));
    kv.set("beta1", format_double(adam.beta1));
    kv.set("beta2", format_double(adam.beta2));
    kv.set("eps", format_double(adam.eps));
    kv.set("patience", std::to_string(patience));
    kv.set("eval_every", std::to_string(eval_every));
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
    kv.set("seeds", s);
    kv.set("stop_metric", to_string(stop_metric));
    return kv;
}

namespace {

std::uint64_t parse_seed(const std::string& s) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used == s.size() && s.find('-') == std::string::npos) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid seed '" + s + "'");
}

}  // namespace

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
    kv.require_known({"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "patience", "eval_every", "seeds",
                      "stop_metric"},
                     "train config");
    TrainConfig c;
    c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.adam.lr = kv.get_double("lr", c.adam.lr);
    c.adam.beta1 = kv.get_double("beta1", c.adam.beta1);
    c.adam.beta2 = kv.get_double("beta2", c.adam.beta2);
    c.adam.eps = kv.get_double("eps", c.adam.eps);
    c.patience = static_cast<int>(kv.get_int("patience", c.patience));
    c.eval_every = static_cast<int>(kv.get_int("eval_every", c.eval_every));
    if (kv.has("seeds")) {
        c.seeds.clear();
        for (const auto& item : kv.get_list("seeds")) {
            const auto dots = item.find("..");
            if (dots == std::string::npos) {
                c.seeds.push_back(parse_seed(item));
                continue;
            }
            const std::uint64_t lo = parse_seed(trim(item.substr(0, dots)));
            const std::uint64_t hi = parse_seed(trim(item.substr(dots + 2)));
            if (hi < lo) throw ConfigError("invalid seed range '" + item + "'");
            for (std::uint64_t s = lo; s <= hi; ++s) c.seeds.push_back(s);
        }
    }
    c.stop_metric = parse_stop_metric(kv.get_or("stop_metric", to_string(c.stop_metric)));
    c.validate();
    return c;
}

// ---------------------------------------------------------------- evaluation

Evaluation evaluate_curves(std::span<const HazardCurve> curves, std::span<const double> overall_risk,
                           const SurvivalSet& set) {
    Evaluation ev;
    ev.overall = harrell_cindex(overall_risk, set.bins, set.events);
    const auto pct = default_percentiles();
    ev.horizons = fit_horizons(set.bins, set.events, pct);
    for (std::size_t h = 0; h < ev.horizons.bins.size(); ++h) {
        try {
            ev.td.emplace_back(td_cindex(curves, set.bins, set.events, ev.horizons.bins[h]));
        } catch (const UndefinedMetricError&) {
            ev.td.emplace_back(std::nullopt);
            ev.warnings.push_back("td_cindex undefined at the " + format_double(pct[h] * 100) +
                                  "% horizon (bin " + std::to_string(ev.horizons.bins[h]) + "); skipped");
        }
    }
    return ev;
}

namespace {

std::vector<HazardCurve> curves_of(const BatchPrediction& pred) {
    std::vector<HazardCurve> out;
    out.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(pred.curve(i));
    return out;
}

}  // namespace

Evaluation evaluate_model(const DualMoeModel& model, const SurvivalSet& set) {
    const auto curves = curves_of(model.batch_forward(set.x));
    const auto risk = model_risk_scores(curves);
    return evaluate_curves(curves, risk, set);
}

Evaluation evaluate_cox(const CoxModel& model, const SurvivalSet& set, const DiscretizationGrid& grid) {
    std::vector<HazardCurve> curves;
    std::vector<double> row(static_cast<std::size_t>(set.x.cols()));
    for (Index i = 0; i < set.x.rows(); ++i) {
        for (Index j = 0; j < set.x.cols(); ++j) row[static_cast<std::size_t>(j)] = set.x(i, j);
        curves.push_back(cox_survival_curve(model, row, grid));
    }
    const auto risk = cox_risks(model, set.x);
    return evaluate_curves(curves, risk, set);
}

// ---------------------------------------------------------------- training

namespace {

struct ValidationScore {
    std::optional<double> cindex;
    double nll = 0.0;
};

ValidationScore score_validation(const DualMoeModel& model, const SurvivalSet& val) {
    const BatchPrediction pred = model.batch_forward(val.x);
    ValidationScore s;
    s.nll = nll_loss(pred.hazard, val.bins, val.events);
    const auto risk = model_risk_scores(curves_of(pred));
    try {
        s.cindex = harrell_cindex(risk, val.bins, val.events).value;
    } catch (const UndefinedMetricError&) {
    }
    return s;
}

LossBreakdown full_loss(const DualMoeModel& model, const SurvivalSet& set) {
    const BatchPrediction pred = model.batch_forward(set.x);
    const auto stats = BatchRoutingStats::from_batch(pred.pi_feat, pred.pi_haz, pred.hazard.cols());
    return total_loss(pred.hazard, set.bins, set.events, stats, model.config());
}

}  // namespace

RunResult train_one(DualMoeConfig model_config, const TrainConfig& tc, const PreparedSplit& data,
                    std::uint64_t seed) {
    tc.validate();
    const SurvivalSet& train = data.train;
    if (train.size() == 0 || data.val.size() == 0 || data.test.size() == 0)
        throw ConfigError("train_one: empty split");
    if (model_config.input_dim == 0) model_config.input_dim = static_cast<int>(train.x.cols());
    if (model_config.max_bin != data.grid.max_bin())
        throw ConfigError("model max_bin " + std::to_string(model_config.max_bin) + " differs from the data grid (" +
                          std::to_string(data.grid.max_bin()) + ")");

    DualMoeModel model(model_config, seed);
    Rng order_rng = Rng(seed).split(0xba7c);

    RunResult r;
    r.seed = seed;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const bool by_cindex = tc.stop_metric == StopMetric::CIndex;
    double best = -std::numeric_limits<double>::infinity();  // higher is better
    std::vector<MatrixXd> best_values;
    int evals_since_best = 0;
    double last_finite = std::numeric_limits<double>::quiet_NaN();

    std::vector<int> bins, events;
    MatrixXd xb;
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        order_rng.shuffle(order);
        EpochLog log;
        log.epoch = epoch;
        double weight = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            const auto nb = static_cast<Index>(end - start);
            xb.resize(nb, train.x.cols());
            bins.resize(static_cast<std::size_t>(nb));
            events.resize(static_cast<std::size_t>(nb));
            for (Index k = 0; k < nb; ++k) {
                const std::size_t i = order[start + static_cast<std::size_t>(k)];
                xb.row(k) = train.x.row(static_cast<Index>(i));
                bins[static_cast<std::size_t>(k)] = train.bins[i];
                events[static_cast<std::size_t>(k)] = train.events[i];
            }
            ad::Graph g;
            const ForwardResult out = model.forward(g, xb);
            const ad::LossTerms loss = ad::total_loss(out, bins, events, model.config());
            const LossBreakdown v = loss.values();
            if (!std::isfinite(v.total))
                throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_index) + " (last finite loss " +
                                          format_double(last_finite) + ")",
                                      last_finite, epoch, batch_index);
            last_finite = v.total;
            g.backward(loss.total);
            ad::adam_step(model.params(), tc.adam);

            const double w = static_cast<double>(nb);
            log.loss.nll += w * v.nll;
            log.loss.lb_feat += w * v.lb_feat;
            log.loss.lb_haz += w * v.lb_haz;
            log.loss.total += w * v.total;
            weight += w;
            ++batch_index;
        }
        log.loss.nll /= weight;
        log.loss.lb_feat /= weight;
        log.loss.lb_haz /= weight;
        log.loss.total /= weight;
        r.epochs_run = epoch;

        const bool evaluate = epoch % tc.eval_every == 0 || epoch == tc.epochs;
        if (evaluate) {
            const ValidationScore s = score_validation(model, data.val);
            log.val_cindex = s.cindex;
            log.val_nll = s.nll;
            const double score = by_cindex ? s.cindex.value_or(-std::numeric_limits<double>::infinity()) : -s.nll;
            if (best_values.empty() || score > best) {
                best = score;
                best_values = model.params().snapshot_values();
                r.best_epoch = epoch;
                evals_since_best = 0;
            } else {
                ++evals_since_best;
            }
        }
        r.log.push_back(log);
        if (evaluate && evals_since_best >= tc.patience) break;
    }

    model.params().restore_values(best_values);
    r.best_val = by_cindex ? best : -best;
    r.final_loss = full_loss(model, train);
    r.test_prediction = model.batch_forward(data.test.x);
    const auto curves = curves_of(r.test_prediction);
    r.test = evaluate_curves(curves, model_risk_scores(curves), data.test);
    r.model.emplace(std::move(model));
    return r;
}

RunResult fit_cox_run(const PreparedSplit& data, std::uint64_t seed, const CoxOptions& options) {
    RunResult r;
    r.seed = seed;
    CoxModel cox = fit_cox(data.train, options);
    r.test = evaluate_cox(cox, data.test, data.grid);
    r.test.warnings.insert(r.test.warnings.begin(), cox.warnings.begin(), cox.warnings.end());
    r.best_val = harrell_cindex(cox_risks(cox, data.val.x), data.val.bins, data.val.events).value;
    r.final_loss.nll = -cox.log_likelihood / static_cast<double>(data.train.size());
    r.final_loss.total = r.final_loss.nll;
    r.cox.emplace(std::move(cox));
    return r;
}

// ---------------------------------------------------------------- grids

const std::vector<std::string>& grid_names() {
    static const std::vector<std::string> names = {"main", "moe-components", "router-input"};
    return names;
}

std::vector<Variant> grid_variants(const std::string& grid, const DualMoeConfig& base) {
    auto with = [&](std::string name, bool feat, bool haz, RouterInput input = RouterInput::Both) {
        Variant v;
        v.name = std::move(name);
        v.model = base;
        v.model.feature_moe = feat;
        v.model.hazard_moe = haz;
        v.model.hazard_router_input = input;
        v.anchor = feat && haz && input == RouterInput::Both;
        return v;
    };
    if (grid == "main") {
        Variant cox;
        cox.name = "coxph";
        cox.kind = ModelKind::Cox;
        cox.model = base;
        return {cox, with("naive", false, false), with("dual", true, true)};
    }
    if (grid == "moe-components")
        return {with("naive", false, false), with("feature-moe", true, false), with("hazard-moe", false, true),
                with("dual", true, true)};
    if (grid == "router-input")
        return {with("features_only", true, true, RouterInput::FeaturesOnly),
                with("time_only", true, true, RouterInput::TimeOnly), with("both", true, true, RouterInput::Both)};
    std::string known;
    for (const auto& n : grid_names()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown grid '" + grid + "' (expected one of: " + known + ")");
}

const MetricSummary* VariantSummary::find(const std::string& metric, std::optional<double> percentile) const {
    for (const auto& m : metrics) {
        if (m.metric != metric) continue;
        if (m.percentile.has_value() != percentile.has_value()) continue;
        if (percentile && std::abs(*m.percentile - *percentile) > 1e-9) continue;
        return &m;
    }
    return nullptr;
}

double VariantSummary::mean_td() const {
    double acc = 0.0;
    int n = 0;
    for (const auto& m : metrics)
        if (m.metric == "td_cindex" && m.n > 0) {
            acc += m.mean;
            ++n;
        }
    return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

namespace {

MetricSummary summarize(std::string metric, std::optional<double> percentile, const std::vector<double>& xs) {
    MetricSummary s;
    s.metric = std::move(metric);
    s.percentile = percentile;
    s.n = static_cast<int>(xs.size());
    if (xs.empty()) {
        s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double acc = 0.0;
    for (double x : xs) acc += x;
    s.mean = acc / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return s;
}

}  // namespace

std::vector<VariantSummary> aggregate(const std::vector<Variant>& variants, const std::vector<GridRun>& runs) {
    const auto pct = default_percentiles();
    std::vector<VariantSummary> out;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        VariantSummary s;
        s.name = variants[v].name;
        s.anchor = variants[v].anchor;
        std::vector<double> overall;
        std::vector<std::vector<double>> td(pct.size());
        for (const auto& run : runs) {
            if (run.variant != v) continue;
            ++s.attempted;
            if (!run.result) continue;
            ++s.completed;
            overall.push_back(run.result->test.overall.value);
            for (std::size_t h = 0; h < pct.size() && h < run.result->test.td.size(); ++h)
                if (run.result->test.td[h]) td[h].push_back(run.result->test.td[h]->value);
        }
        s.metrics.push_back(summarize("cindex", std::nullopt, overall));
        for (std::size_t h = 0; h < pct.size(); ++h) s.metrics.push_back(summarize("td_cindex", pct[h], td[h]));
        out.push_back(std::move(s));
    }
    return out;
}

GridResult run_grid(const RawDataset& raw, const PreprocessOptions& options, const std::vector<Variant>& variants,
                    const TrainConfig& tc, int jobs, const RunCallback& on_done) {
    if (variants.empty()) throw ConfigError("run_grid: no variants");
    tc.validate();
    GridResult g;
    g.variants = variants;
    g.seeds = tc.seeds;

    std::vector<PreparedSplit> splits;
    splits.reserve(tc.seeds.size());
    for (std::uint64_t seed : tc.seeds) splits.push_back(prepare_split(raw, options, seed));

    for (std::size_t v = 0; v < variants.size(); ++v)
        for (std::uint64_t seed : tc.seeds) g.runs.push_back(GridRun{v, seed, std::nullopt, {}});

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= g.runs.size()) return;
            GridRun& run = g.runs[k];
            const Variant& variant = variants[run.variant];
            const PreparedSplit& split = splits[k % tc.seeds.size()];
            try {
                if (variant.kind == ModelKind::Cox)
                    run.result = fit_cox_run(split, run.seed);
                else
                    run.result = train_one(variant.model, tc, split, run.seed);
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            if (!on_done) continue;
            try {
                on_done(variant, run, split);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(g.runs.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    g.summary = aggregate(g.variants, g.runs);
    return g;
}

}  // namespace moesurv
