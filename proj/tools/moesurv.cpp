// moesurv: prepare, train, evaluate, ablate, export-routing.
//
// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or
// configuration error.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "moesurv/data.hpp"
#include "moesurv/error.hpp"
#include "moesurv/keyvalue.hpp"
#include "moesurv/parameters.hpp"
#include "moesurv/report.hpp"
#include "moesurv/trainer.hpp"

namespace fs = std::filesystem;
using namespace moesurv;

namespace {

constexpr const char* kCacheFile = "dataset.bin";
constexpr const char* kSummaryFile = "summary.txt";

struct PreparedData {
    DatasetCache cache;
    std::string name;
};

PreparedData load_prepared(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("data directory not found: " + dir.string());
    PreparedData d;
    d.cache = load_dataset_cache(dir / kCacheFile);
    if (fs::exists(dir / kSummaryFile)) d.name = KeyValues::load(dir / kSummaryFile).get_or("name", "");
    return d;
}

DualMoeConfig model_config_for(const PreparedData& data, const std::string& path) {
    if (!path.empty()) return DualMoeConfig::from_kv(KeyValues::load(path));
    if (data.name == "metabric" || data.name == "gbsg") return DualMoeConfig::preset(data.name);
    throw ConfigError("no --model-config given and dataset '" + data.name + "' has no built-in preset");
}

TrainConfig train_config_for(const std::string& path, const std::string& seeds) {
    KeyValues kv = path.empty() ? KeyValues{} : KeyValues::load(path);
    if (!seeds.empty()) {
        KeyValues merged;
        for (const auto& [k, v] : kv.entries())
            if (k != "seeds") merged.set(k, v);
        merged.set("seeds", seeds);
        kv = merged;
    }
    return TrainConfig::from_kv(kv);
}

/// Model config with input_dim and max_bin taken from the data.
DualMoeConfig bind_to_data(DualMoeConfig c, const DatasetCache& cache) {
    c.input_dim = static_cast<int>(cache.raw.features.size());
    c.max_bin = cache.options.max_bin;
    return c;
}

std::string run_config_text(const Variant& variant, const TrainConfig& tc, std::uint64_t seed,
                            const PreprocessOptions& options) {
    KeyValues kv;
    kv.set("variant", variant.name);
    kv.set("kind", variant.kind == ModelKind::Cox ? "coxph" : "dual_moe");
    kv.set("seed", std::to_string(seed));
    kv.merge(options.to_kv(), "data.");
    if (variant.kind == ModelKind::DualMoe) kv.merge(variant.model.to_kv(), "model.");
    kv.merge(tc.to_kv(), "train.");
    return kv.str();
}

std::string to_text(const std::function<void(std::ostream&)>& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

/// Writes one run's artifacts into a private directory, then renames it
/// over `dir`.
void write_run_artifacts(const fs::path& dir, const Variant& variant, const GridRun& run, const TrainConfig& tc,
                         const PreparedSplit& split, const DatasetCache& cache) {
    fs::path tmp = dir;
    tmp += ".partial";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const std::string config = run_config_text(variant, tc, run.seed, cache.options);
    write_file_atomic(tmp / "config.txt", config);
    if (!run.result) {
        write_file_atomic(tmp / "error.txt", run.error + "\n");
    } else {
        const RunResult& r = *run.result;
        write_file_atomic(tmp / "metrics.csv", to_text([&](std::ostream& os) {
                              write_metrics_header(os);
                              write_metrics_rows(os, r.seed, "test", r.test);
                          }));
        if (r.model) {
            write_file_atomic(tmp / "train_log.csv", to_text([&](std::ostream& os) { write_training_log(os, r.log); }));
            ad::save_checkpoint(tmp / "checkpoint.bin", r.model->params(), config);
            const RoutingExport ex = RoutingExport::from_prediction(split.test, r.test_prediction,
                                                                    cache.raw.subgroup_names);
            write_file_atomic(tmp / "routing_feature.csv",
                              to_text([&](std::ostream& os) { write_feature_routing_csv(os, ex); }));
            std::vector<std::size_t> rows(ex.size());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            write_file_atomic(tmp / "routing_hazard.csv",
                              to_text([&](std::ostream& os) { write_hazard_routing_csv(os, ex, rows); }));
        }
        if (r.cox) {
            write_file_atomic(tmp / "cox_coefficients.csv", to_text([&](std::ostream& os) {
                                  write_csv_row(os, {"feature", "beta"});
                                  for (std::size_t j = 0; j < cache.raw.features.size(); ++j)
                                      write_csv_row(os, {cache.raw.features[j].name,
                                                         format_double(r.cox->beta(static_cast<Eigen::Index>(j)))});
                              }));
        }
        std::string notes;
        for (const auto& w : r.test.warnings) notes += w + "\n";
        if (!notes.empty()) write_file_atomic(tmp / "warnings.txt", notes);
    }
    fs::remove_all(dir);
    fs::rename(tmp, dir);
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

/// Concatenated per-seed metric rows of one variant, seeds in grid order.
std::string variant_metrics(const GridResult& g, std::size_t v) {
    return to_text([&](std::ostream& os) {
        write_metrics_header(os);
        for (const auto& run : g.runs)
            if (run.variant == v && run.result) write_metrics_rows(os, run.seed, "test", run.result->test);
    });
}

void report_failures(const GridResult& g) {
    for (const auto& run : g.runs)
        if (!run.result)
            std::cerr << "warning: " << g.variants[run.variant].name << " seed " << run.seed
                      << " aborted: " << run.error << "\n";
}

GridResult execute_grid(const DatasetCache& cache, const std::vector<Variant>& variants, const TrainConfig& tc,
                        int jobs, const fs::path& out, bool per_variant_dirs) {
    fs::create_directories(out);
    std::mutex log_mutex;
    auto on_done = [&](const Variant& variant, const GridRun& run, const PreparedSplit& split) {
        const fs::path dir = per_variant_dirs ? out / variant.name / seed_dir(run.seed) : out / seed_dir(run.seed);
        write_run_artifacts(dir, variant, run, tc, split, cache);
        std::lock_guard lock(log_mutex);
        std::cerr << variant.name << " seed " << run.seed << ": "
                  << (run.result ? "test C-index " + format_double(run.result->test.overall.value)
                                 : "aborted (" + run.error + ")")
                  << "\n";
    };
    GridResult g = run_grid(cache.raw, cache.options, variants, tc, jobs, on_done);
    report_failures(g);
    for (std::size_t v = 0; v < g.variants.size(); ++v) {
        const fs::path dir = per_variant_dirs ? out / g.variants[v].name : out;
        write_file_atomic(dir / "metrics.csv", variant_metrics(g, v));
    }
    write_file_atomic(out / "summary.csv", to_text([&](std::ostream& os) { write_summary_csv(os, g.summary); }));
    return g;
}

// ---------------------------------------------------------------- commands

struct PrepareArgs {
    std::string input, schema, out, scheme = "quantile", name, split = "0.6,0.2,0.2";
    int bins = 19;
};

int cmd_prepare(const PrepareArgs& a) {
    const Schema schema = Schema::load(a.schema);
    DatasetCache cache;
    cache.schema = schema;
    cache.raw = load_csv(a.input, schema);
    cache.options.max_bin = a.bins;
    cache.options.scheme = parse_bin_scheme(a.scheme);
    const auto parts = split_list(a.split);
    if (parts.size() != 3) throw ConfigError("--split expects three comma-separated fractions");
    try {
        cache.options.fractions = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
    } catch (const std::exception&) {
        throw ConfigError("--split expects numeric fractions, got '" + a.split + "'");
    }
    // Fails early on degenerate splits or binning.
    const PreparedSplit first = prepare_split(cache.raw, cache.options, 0);

    fs::create_directories(a.out);
    const fs::path cache_path = fs::path(a.out) / kCacheFile;
    fs::path tmp = cache_path;
    tmp += ".tmp";
    save_dataset_cache(tmp, cache);
    fs::rename(tmp, cache_path);

    const std::string name = a.name.empty() ? fs::path(a.input).stem().string() : a.name;
    const double censored = cache.raw.censored_fraction();
    KeyValues kv;
    kv.set("name", name);
    kv.set("source", fs::path(a.input).filename().string());
    kv.set("rows", std::to_string(cache.raw.rows()));
    kv.set("features", std::to_string(cache.raw.features.size()));
    kv.set("censored_fraction", format_double(censored));
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.1f%%", censored * 100.0);
    kv.set("censored_percent", pct);
    kv.merge(cache.options.to_kv());
    std::string edges;
    for (std::size_t i = 0; i < first.grid.cuts.size(); ++i) edges += (i ? "," : "") + format_double(first.grid.cuts[i]);
    kv.set("bin_edges_seed0", edges);
    std::string groups;
    for (std::size_t i = 0; i < cache.raw.subgroup_names.size(); ++i) groups += (i ? "," : "") + cache.raw.subgroup_names[i];
    if (!groups.empty()) kv.set("subgroups", groups);
    write_file_atomic(fs::path(a.out) / kSummaryFile, kv.str());

    std::cout << name << ": " << cache.raw.rows() << " patients, " << cache.raw.features.size()
              << " model features, " << pct << " censored\n";
    std::cout << "bin edges (seed 0 train split, " << a.scheme << ", " << a.bins + 1 << " bins): " << edges << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, model_config, train_config, out, seeds;
    int jobs = 1;
    bool with_cox = false;
};

int cmd_train(const TrainArgs& a) {
    const PreparedData data = load_prepared(a.data);
    const TrainConfig tc = train_config_for(a.train_config, a.seeds);
    std::vector<Variant> variants;
    Variant v;
    v.name = "dual";
    v.model = bind_to_data(model_config_for(data, a.model_config), data.cache);
    v.anchor = true;
    variants.push_back(v);
    if (a.with_cox) {
        Variant c;
        c.name = "coxph";
        c.kind = ModelKind::Cox;
        c.model = v.model;
        variants.push_back(c);
    }
    const fs::path out = a.out;
    const GridResult g = execute_grid(data.cache, variants, tc, a.jobs, out, a.with_cox);
    KeyValues cfg;
    cfg.merge(data.cache.options.to_kv(), "data.");
    cfg.merge(v.model.to_kv(), "model.");
    cfg.merge(tc.to_kv(), "train.");
    write_file_atomic(out / "config.txt", cfg.str());
    const std::string table = render_summary_table(g.summary, "Test C-index over " + std::to_string(tc.seeds.size()) + " seeds");
    write_file_atomic(out / "summary.txt", table);
    std::cout << table;
    return std::any_of(g.runs.begin(), g.runs.end(), [](const GridRun& r) { return r.result.has_value(); }) ? 0 : 1;
}

struct EvaluateArgs {
    std::string checkpoint, data, split = "test", out;
};

struct LoadedRun {
    KeyValues config;
    DualMoeModel model;
    PreparedSplit split;
    std::uint64_t seed;
};

LoadedRun load_run(const std::string& checkpoint, const PreparedData& data) {
    ad::Checkpoint ck = ad::load_checkpoint(checkpoint);
    KeyValues cfg = KeyValues::parse(ck.config_text, checkpoint + " (config)");
    const PreprocessOptions opts = PreprocessOptions::from_kv(cfg.with_prefix("data."));
    if (opts.to_kv().str() != data.cache.options.to_kv().str())
        throw ConfigError("checkpoint was trained with different preprocessing options than " + data.name);
    const std::uint64_t seed = std::stoull(cfg.get("seed"));
    DualMoeModel model(DualMoeConfig::from_kv(cfg.with_prefix("model.")), std::move(ck.store));
    PreparedSplit split = prepare_split(data.cache.raw, data.cache.options, seed);
    if (model.config().input_dim != split.train.x.cols())
        throw ConfigError("checkpoint expects " + std::to_string(model.config().input_dim) + " features, data has " +
                          std::to_string(split.train.x.cols()));
    return LoadedRun{std::move(cfg), std::move(model), std::move(split), seed};
}

const SurvivalSet& pick_split(const PreparedSplit& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

int cmd_evaluate(const EvaluateArgs& a) {
    const PreparedData data = load_prepared(a.data);
    const LoadedRun run = load_run(a.checkpoint, data);
    const Evaluation ev = evaluate_model(run.model, pick_split(run.split, a.split));
    const std::string csv = to_text([&](std::ostream& os) {
        write_metrics_header(os);
        write_metrics_rows(os, run.seed, a.split, ev);
    });
    for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
    if (a.out.empty())
        std::cout << csv;
    else
        write_file_atomic(a.out, csv);
    return 0;
}

struct AblateArgs {
    std::string data, grid, out, model_config, train_config, seeds;
    int jobs = 1;
};

int cmd_ablate(const AblateArgs& a) {
    const PreparedData data = load_prepared(a.data);
    const DualMoeConfig base = bind_to_data(model_config_for(data, a.model_config), data.cache);
    const std::vector<Variant> variants = grid_variants(a.grid, base);
    const TrainConfig tc = train_config_for(a.train_config, a.seeds);
    const fs::path out = a.out;
    const GridResult g = execute_grid(data.cache, variants, tc, a.jobs, out, true);
    const std::string table = render_summary_table(
        g.summary, "Grid '" + a.grid + "' on " + data.name + ", test C-index over " + std::to_string(tc.seeds.size()) +
                       " seeds");
    write_file_atomic(out / "summary.txt", table);
    std::cout << table;
    return std::any_of(g.runs.begin(), g.runs.end(), [](const GridRun& r) { return r.result.has_value(); }) ? 0 : 1;
}

struct ExportArgs {
    std::string checkpoint, data, subgroups, patients, out, split = "all";
};

int cmd_export_routing(const ExportArgs& a) {
    const PreparedData data = load_prepared(a.data);
    const LoadedRun run = load_run(a.checkpoint, data);

    SurvivalSet set;
    if (a.split == "all") {
        std::vector<std::size_t> rows(data.cache.raw.rows());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        set = make_survival_set(data.cache.raw, rows, run.split.stats, run.split.grid);
    } else {
        set = pick_split(run.split, a.split);
    }
    const RoutingExport ex = RoutingExport::from_prediction(set, run.model.batch_forward(set.x),
                                                            data.cache.raw.subgroup_names);

    std::vector<std::string> groups = split_list(a.subgroups);
    if (groups.empty()) groups = ex.subgroup_names;
    const auto means = subgroup_means(ex, groups);

    std::vector<std::size_t> rows;
    for (const auto& id : split_list(a.patients)) rows.push_back(ex.index_of(id));
    if (rows.empty())
        for (std::size_t i = 0; i < std::min<std::size_t>(4, ex.size()); ++i) rows.push_back(i);

    const fs::path out = a.out;
    write_file_atomic(out / "routing_feature.csv", to_text([&](std::ostream& os) { write_feature_routing_csv(os, ex); }));
    write_file_atomic(out / "routing_subgroups.csv", to_text([&](std::ostream& os) { write_subgroup_means_csv(os, means); }));
    write_file_atomic(out / "routing_hazard.csv", to_text([&](std::ostream& os) { write_hazard_routing_csv(os, ex, rows); }));
    write_file_atomic(out / "routing_subgroups.svg", svg_subgroup_bars(means));
    for (std::size_t i : rows)
        write_file_atomic(out / ("routing_hazard_" + ex.ids[i] + ".svg"), svg_hazard_area(ex.ids[i], ex.hazard_routing(i)));
    std::cout << "exported routing for " << ex.size() << " patients (" << means.size() << " subgroup rows, "
              << rows.size() << " hazard trajectories) to " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual mixture-of-experts discrete-time survival models"};
    app.require_subcommand(1);

    PrepareArgs pa;
    auto* prepare = app.add_subcommand("prepare", "Ingest a CSV and write the processed-dataset cache");
    prepare->add_option("--input", pa.input, "Survival CSV")->required();
    prepare->add_option("--schema", pa.schema, "Column-role schema file")->required();
    prepare->add_option("--bins", pa.bins, "Final bin index T_max (T_max+1 bins)");
    prepare->add_option("--scheme", pa.scheme, "quantile or uniform");
    prepare->add_option("--split", pa.split, "train,val,test fractions");
    prepare->add_option("--name", pa.name, "Dataset name (defaults to the input file stem)");
    prepare->add_option("--out", pa.out, "Output directory")->required();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train the dual-MoE model over one or more seeds");
    train->add_option("--data", ta.data, "Prepared data directory")->required();
    train->add_option("--model-config", ta.model_config, "Model key-value file");
    train->add_option("--train-config", ta.train_config, "Training key-value file");
    train->add_option("--seeds", ta.seeds, "Seed list overriding the train config (e.g. 0..9 or 1,4)");
    train->add_option("--jobs", ta.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    train->add_flag("--with-cox", ta.with_cox, "Also fit the CoxPH baseline on every seed");
    train->add_option("--out", ta.out, "Output directory")->required();

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a split of its seed");
    evaluate->add_option("--checkpoint", ea.checkpoint, "checkpoint.bin")->required();
    evaluate->add_option("--data", ea.data, "Prepared data directory")->required();
    evaluate->add_option("--split", ea.split, "train, val or test");
    evaluate->add_option("--out", ea.out, "Metrics CSV (stdout when omitted)");

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "Run an experiment grid over seeds");
    ablate->add_option("--data", aa.data, "Prepared data directory")->required();
    ablate->add_option("--grid", aa.grid, "main, moe-components or router-input")->required();
    ablate->add_option("--model-config", aa.model_config, "Base model key-value file");
    ablate->add_option("--train-config", aa.train_config, "Training key-value file");
    ablate->add_option("--seeds", aa.seeds, "Seed list overriding the train config");
    ablate->add_option("--jobs", aa.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    ablate->add_option("--out", aa.out, "Output directory")->required();

    ExportArgs xa;
    auto* exp = app.add_subcommand("export-routing", "Export routing probabilities and SVG charts");
    exp->add_option("--checkpoint", xa.checkpoint, "checkpoint.bin")->required();
    exp->add_option("--data", xa.data, "Prepared data directory")->required();
    exp->add_option("--subgroups", xa.subgroups, "Subgroup aliases, e.g. ER,HER2 (all when omitted)");
    exp->add_option("--patients", xa.patients, "Patient ids for hazard trajectories (first four when omitted)");
    exp->add_option("--split", xa.split, "all, train, val or test");
    exp->add_option("--out", xa.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*prepare) return cmd_prepare(pa);
        if (*train) return cmd_train(ta);
        if (*evaluate) return cmd_evaluate(ea);
        if (*ablate) return cmd_ablate(aa);
        if (*exp) return cmd_export_routing(xa);
    } catch (const IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
