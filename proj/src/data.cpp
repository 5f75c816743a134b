#include "moesurv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "moesurv/binio.hpp"
#include "moesurv/error.hpp"
#include "moesurv/rng.hpp"

namespace moesurv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr char kCacheMagic[9] = "MOESDATA";
constexpr std::uint32_t kCacheVersion = 1;

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

bool parse_number(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (b != e && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && p == e && std::isfinite(out);
}

}  // namespace

// ---------------------------------------------------------------- schema

Schema Schema::from_kv(const KeyValues& kv) {
    kv.require_known({"duration", "event", "id", "categorical", "exclude", "subgroups", "subgroup_only"}, "schema");
    Schema s;
    s.duration_column = kv.get_or("duration", s.duration_column);
    s.event_column = kv.get_or("event", s.event_column);
    s.id_column = kv.get_or("id", "");
    s.categorical = kv.get_list("categorical");
    s.exclude = kv.get_list("exclude");
    const auto only = kv.get_list("subgroup_only");
    for (const auto& item : kv.get_list("subgroups")) {
        SubgroupSpec g;
        if (auto colon = item.find(':'); colon != std::string::npos) {
            g.alias = trim(item.substr(0, colon));
            g.column = trim(item.substr(colon + 1));
        } else {
            g.alias = g.column = item;
        }
        if (g.alias.empty() || g.column.empty()) throw ConfigError("schema: malformed subgroup entry '" + item + "'");
        g.subgroup_only = contains(only, g.alias) || contains(only, g.column);
        s.subgroups.push_back(std::move(g));
    }
    for (const auto& o : only) {
        const bool known = std::any_of(s.subgroups.begin(), s.subgroups.end(),
                                       [&](const SubgroupSpec& g) { return g.alias == o || g.column == o; });
        if (!known) throw ConfigError("schema: subgroup_only names unknown subgroup '" + o + "'");
    }
    return s;
}

Schema Schema::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("schema file not found: " + path.string());
    return from_kv(KeyValues::load(path));
}

KeyValues Schema::to_kv() const {
    auto join = [](const std::vector<std::string>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
        return out;
    };
    KeyValues kv;
    kv.set("duration", duration_column);
    kv.set("event", event_column);
    if (!id_column.empty()) kv.set("id", id_column);
    if (!categorical.empty()) kv.set("categorical", join(categorical));
    if (!exclude.empty()) kv.set("exclude", join(exclude));
    std::vector<std::string> groups, only;
    for (const auto& g : subgroups) {
        groups.push_back(g.alias + ":" + g.column);
        if (g.subgroup_only) only.push_back(g.alias);
    }
    if (!groups.empty()) kv.set("subgroups", join(groups));
    if (!only.empty()) kv.set("subgroup_only", join(only));
    return kv;
}

// ---------------------------------------------------------------- csv

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any = false;  // current record has content
    char c;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        const bool blank = row.size() == 1 && row[0].empty();
        if (!blank) records.push_back(std::move(row));
        row.clear();
        any = false;
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"': in_quotes = true; any = true; break;
            case ',': end_field(); any = true; break;
            case '\r': break;
            case '\n': end_record(); break;
            default: field.push_back(c); any = true;
        }
    }
    if (any || !field.empty() || !row.empty()) end_record();
    return records;
}

double RawDataset::censored_fraction() const {
    if (events.empty()) return 0.0;
    const auto n_events = std::count(events.begin(), events.end(), 1);
    return 1.0 - static_cast<double>(n_events) / static_cast<double>(events.size());
}

RawDataset parse_csv(std::istream& in, const Schema& schema, const std::string& source) {
    const auto records = read_csv_records(in);
    if (records.empty()) throw IngestionError(source + ": empty file");
    const auto& header = records.front();
    if (records.size() == 1) throw IngestionError(source + ": no data rows");

    std::map<std::string, std::size_t> col_index;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (!col_index.emplace(name, c).second)
            throw IngestionError(source + ": duplicate column '" + name + "'", 0, name);
    }
    auto require = [&](const std::string& name, const char* role) {
        auto it = col_index.find(name);
        if (it == col_index.end())
            throw IngestionError(source + ": missing " + std::string(role) + " column '" + name + "'", 0, name);
        return it->second;
    };
    const std::size_t dur_col = require(schema.duration_column, "duration");
    const std::size_t evt_col = require(schema.event_column, "event");
    const bool has_id = !schema.id_column.empty();
    const std::size_t id_col = has_id ? require(schema.id_column, "id") : 0;
    for (const auto& c : schema.categorical) require(c, "categorical");
    for (const auto& c : schema.exclude) require(c, "excluded");
    std::vector<std::size_t> subgroup_cols;
    std::vector<std::string> skip = schema.exclude;
    for (const auto& g : schema.subgroups) {
        subgroup_cols.push_back(require(g.column, "subgroup"));
        if (g.subgroup_only) skip.push_back(g.column);
    }

    struct Source {
        std::size_t col;
        std::string name;
        bool categorical;
    };
    std::vector<Source> sources;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (c == dur_col || c == evt_col || (has_id && c == id_col) || contains(skip, name)) continue;
        sources.push_back({c, name, contains(schema.categorical, name)});
    }

    const std::size_t n = records.size() - 1;
    RawDataset ds;
    ds.durations.resize(n);
    ds.events.resize(n);
    ds.ids.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = records[r + 1];
        const std::size_t row_no = r + 1;
        if (rec.size() != header.size())
            throw IngestionError(source + ": row " + std::to_string(row_no) + " has " + std::to_string(rec.size()) +
                                     " fields, header has " + std::to_string(header.size()),
                                 row_no);
        double d = 0;
        const std::string dcell = trim(rec[dur_col]);
        if (!parse_number(dcell, d) || d < 0)
            throw IngestionError(source + ": row " + std::to_string(row_no) + ", column '" + schema.duration_column +
                                     "': invalid duration '" + dcell + "'",
                                 row_no, schema.duration_column);
        double e = 0;
        const std::string ecell = trim(rec[evt_col]);
        if (!parse_number(ecell, e) || (e != 0.0 && e != 1.0))
            throw IngestionError(source + ": row " + std::to_string(row_no) + ", column '" + schema.event_column +
                                     "': event must be 0 or 1, got '" + ecell + "'",
                                 row_no, schema.event_column);
        ds.durations[r] = d;
        ds.events[r] = static_cast<int>(e);
        ds.ids[r] = has_id ? trim(rec[id_col]) : std::to_string(row_no);
    }

    // Expand columns: continuous -> one column, categorical -> sorted levels.
    std::vector<std::vector<double>> columns;
    for (const auto& src : sources) {
        if (!src.categorical) {
            std::vector<double> col(n);
            for (std::size_t r = 0; r < n; ++r) {
                const std::string cell = trim(records[r + 1][src.col]);
                if (is_missing_token(cell)) {
                    col[r] = kNaN;
                } else if (!parse_number(cell, col[r])) {
                    throw IngestionError(source + ": row " + std::to_string(r + 1) + ", column '" + src.name +
                                             "': cannot parse '" + cell + "' as a number",
                                         r + 1, src.name);
                }
            }
            ds.features.push_back({src.name, src.name, true});
            columns.push_back(std::move(col));
            continue;
        }
        std::set<std::string> levels;
        for (std::size_t r = 0; r < n; ++r) {
            std::string cell = trim(records[r + 1][src.col]);
            if (!is_missing_token(cell)) levels.insert(std::move(cell));
        }
        for (const auto& level : levels) {
            std::vector<double> col(n);
            for (std::size_t r = 0; r < n; ++r) col[r] = trim(records[r + 1][src.col]) == level ? 1.0 : 0.0;
            ds.features.push_back({src.name + "=" + level, src.name, false});
            columns.push_back(std::move(col));
        }
    }
    ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
        for (std::size_t r = 0; r < n; ++r) ds.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns[c][r];

    for (std::size_t g = 0; g < schema.subgroups.size(); ++g) {
        ds.subgroup_names.push_back(schema.subgroups[g].alias);
        std::vector<std::string> labels(n);
        for (std::size_t r = 0; r < n; ++r) labels[r] = trim(records[r + 1][subgroup_cols[g]]);
        ds.subgroup_labels.push_back(std::move(labels));
    }
    return ds;
}

RawDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open CSV file: " + path.string());
    return parse_csv(in, schema, path.string());
}

// ---------------------------------------------------------------- discretization

BinScheme parse_bin_scheme(const std::string& s) {
    if (s == "quantile") return BinScheme::Quantile;
    if (s == "uniform") return BinScheme::Uniform;
    throw ConfigError("unknown binning scheme '" + s + "' (expected quantile or uniform)");
}

std::string to_string(BinScheme s) { return s == BinScheme::Quantile ? "quantile" : "uniform"; }

int DiscretizationGrid::bin_of(double duration) const {
    const auto it = std::lower_bound(cuts.begin(), cuts.end(), duration);
    return static_cast<int>(it - cuts.begin());
}

std::vector<double> DiscretizationGrid::bin_upper_edges() const {
    std::vector<double> edges = cuts;
    edges.push_back(std::numeric_limits<double>::infinity());
    return edges;
}

namespace {

std::vector<double> quantile_cuts(const std::vector<double>& sorted, int max_bin) {
    std::vector<double> cuts;
    const double last = static_cast<double>(sorted.size() - 1);
    for (int k = 1; k <= max_bin; ++k) {
        const double h = last * static_cast<double>(k) / max_bin;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        cuts.push_back(sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
    }
    return cuts;
}

bool strictly_increasing(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

DiscretizationGrid fit_discretization(std::span<const double> durations, int max_bin, BinScheme scheme) {
    if (max_bin < 2) throw ConfigError("discretization needs max_bin >= 2, got " + std::to_string(max_bin));
    if (durations.empty()) throw ConfigError("discretization: no durations");
    std::vector<double> sorted(durations.begin(), durations.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) throw ConfigError("discretization: all durations are equal");

    DiscretizationGrid grid;
    if (scheme == BinScheme::Uniform) {
        const double lo = sorted.front(), hi = sorted.back();
        for (int k = 1; k <= max_bin; ++k) grid.cuts.push_back(lo + (hi - lo) * static_cast<double>(k) / max_bin);
        return grid;
    }
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<int>(distinct.size()) < max_bin)
        throw ConfigError("quantile discretization needs at least " + std::to_string(max_bin) +
                          " distinct durations, got " + std::to_string(distinct.size()));
    grid.cuts = quantile_cuts(sorted, max_bin);
    if (!strictly_increasing(grid.cuts)) grid.cuts = quantile_cuts(distinct, max_bin);
    if (!strictly_increasing(grid.cuts)) throw ConfigError("quantile discretization produced repeated cut points");
    return grid;
}

// ---------------------------------------------------------------- standardization

FeatureStats fit_feature_stats(const Matrix& x_train, std::span<const FeatureColumn> features) {
    if (static_cast<std::size_t>(x_train.cols()) != features.size())
        throw ConfigError("feature statistics: column count does not match feature list");
    const Eigen::Index n = x_train.rows();
    FeatureStats s;
    for (Eigen::Index c = 0; c < x_train.cols(); ++c) {
        const auto& f = features[static_cast<std::size_t>(c)];
        s.continuous.push_back(f.continuous);
        std::vector<double> present;
        for (Eigen::Index r = 0; r < n; ++r)
            if (!std::isnan(x_train(r, c))) present.push_back(x_train(r, c));
        double median = 0.0;
        if (!present.empty()) {
            std::sort(present.begin(), present.end());
            const std::size_t m = present.size();
            median = m % 2 ? present[m / 2] : 0.5 * (present[m / 2 - 1] + present[m / 2]);
        } else if (f.continuous) {
            s.warnings.push_back("column '" + f.name + "' has no observed values in the training split; imputing 0");
        }
        s.median.push_back(median);
        if (!f.continuous) {
            s.mean.push_back(0.0);
            s.stddev.push_back(1.0);
            continue;
        }
        double sum = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) sum += std::isnan(x_train(r, c)) ? median : x_train(r, c);
        const double mean = n ? sum / static_cast<double>(n) : 0.0;
        double ss = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double v = (std::isnan(x_train(r, c)) ? median : x_train(r, c)) - mean;
            ss += v * v;
        }
        double sd = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            s.warnings.push_back("column '" + f.name + "' has zero variance in the training split; left at 0");
            sd = 0.0;
        }
        s.mean.push_back(mean);
        s.stddev.push_back(sd);
    }
    return s;
}

Matrix apply_feature_stats(const Matrix& x, const FeatureStats& stats) {
    if (static_cast<std::size_t>(x.cols()) != stats.mean.size())
        throw ConfigError("standardize: column count does not match statistics");
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto ci = static_cast<std::size_t>(c);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            double v = x(r, c);
            if (!stats.continuous[ci]) {
                out(r, c) = std::isnan(v) ? 0.0 : v;
                continue;
            }
            if (std::isnan(v)) v = stats.median[ci];
            out(r, c) = stats.stddev[ci] > 0.0 ? (v - stats.mean[ci]) / stats.stddev[ci] : 0.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------- splitting

SplitIndices split_indices(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must be non-negative and sum to 1");
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.train));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.val));
    if (n_train + n_val >= n || n_train == 0 || n_val == 0)
        throw ConfigError("split of " + std::to_string(n) + " rows leaves an empty partition");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng(seed).split(0x5b1);
    rng.shuffle(order);

    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
    return s;
}

// ---------------------------------------------------------------- records

PatientRecord SurvivalSet::record(std::size_t i) const {
    PatientRecord r;
    r.id = ids[i];
    const auto row = static_cast<Eigen::Index>(i);
    r.x.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) r.x[static_cast<std::size_t>(c)] = x(row, c);
    r.bin = bins[i];
    r.event = events[i];
    r.duration = durations[i];
    r.subgroups = subgroups.empty() ? std::vector<std::string>{} : subgroups[i];
    return r;
}

SurvivalSet SurvivalSet::subset(std::span<const std::size_t> rows) const {
    SurvivalSet s;
    s.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t i = rows[k];
        s.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(i));
        s.ids.push_back(ids[i]);
        s.bins.push_back(bins[i]);
        s.events.push_back(events[i]);
        s.durations.push_back(durations[i]);
        if (!subgroups.empty()) s.subgroups.push_back(subgroups[i]);
    }
    return s;
}

SurvivalSet make_survival_set(const RawDataset& raw, std::span<const std::size_t> rows, const FeatureStats& stats,
                              const DiscretizationGrid& grid) {
    Matrix sel(static_cast<Eigen::Index>(rows.size()), raw.x.cols());
    SurvivalSet s;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t i = rows[k];
        sel.row(static_cast<Eigen::Index>(k)) = raw.x.row(static_cast<Eigen::Index>(i));
        s.ids.push_back(raw.ids[i]);
        s.bins.push_back(grid.bin_of(raw.durations[i]));
        s.events.push_back(raw.events[i]);
        s.durations.push_back(raw.durations[i]);
        std::vector<std::string> labels;
        for (const auto& g : raw.subgroup_labels) labels.push_back(g[i]);
        s.subgroups.push_back(std::move(labels));
    }
    s.x = apply_feature_stats(sel, stats);
    return s;
}

KeyValues PreprocessOptions::to_kv() const {
    KeyValues kv;
    kv.set("max_bin", std::to_string(max_bin));
    kv.set("scheme", to_string(scheme));
    kv.set("train_fraction", format_double(fractions.train));
    kv.set("val_fraction", format_double(fractions.val));
    kv.set("test_fraction", format_double(fractions.test));
    return kv;
}

PreprocessOptions PreprocessOptions::from_kv(const KeyValues& kv) {
    kv.require_known({"max_bin", "scheme", "train_fraction", "val_fraction", "test_fraction"}, "preprocessing");
    PreprocessOptions o;
    o.max_bin = static_cast<int>(kv.get_int("max_bin", o.max_bin));
    o.scheme = parse_bin_scheme(kv.get_or("scheme", to_string(o.scheme)));
    o.fractions.train = kv.get_double("train_fraction", o.fractions.train);
    o.fractions.val = kv.get_double("val_fraction", o.fractions.val);
    o.fractions.test = kv.get_double("test_fraction", o.fractions.test);
    return o;
}

PreparedSplit prepare_split(const RawDataset& raw, const PreprocessOptions& options, std::uint64_t seed) {
    PreparedSplit p;
    p.indices = split_indices(raw.rows(), options.fractions, seed);
    Matrix x_train(static_cast<Eigen::Index>(p.indices.train.size()), raw.x.cols());
    std::vector<double> train_durations;
    for (std::size_t k = 0; k < p.indices.train.size(); ++k) {
        x_train.row(static_cast<Eigen::Index>(k)) = raw.x.row(static_cast<Eigen::Index>(p.indices.train[k]));
        train_durations.push_back(raw.durations[p.indices.train[k]]);
    }
    p.stats = fit_feature_stats(x_train, raw.features);
    p.grid = fit_discretization(train_durations, options.max_bin, options.scheme);
    p.train = make_survival_set(raw, p.indices.train, p.stats, p.grid);
    p.val = make_survival_set(raw, p.indices.val, p.stats, p.grid);
    p.test = make_survival_set(raw, p.indices.test, p.stats, p.grid);
    return p;
}

// ---------------------------------------------------------------- cache

void save_dataset_cache(const std::filesystem::path& path, const DatasetCache& cache) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write dataset cache: " + path.string());
    binio::Writer w(os);
    const RawDataset& raw = cache.raw;
    w.magic(kCacheMagic);
    w.u32(kCacheVersion);
    w.str(cache.schema.to_kv().str());
    w.str(cache.options.to_kv().str());
    w.strs(raw.ids);
    w.u64(raw.features.size());
    for (const auto& f : raw.features) {
        w.str(f.name);
        w.str(f.source);
        w.u32(f.continuous ? 1 : 0);
    }
    w.matrix(raw.x);
    w.f64s(raw.durations);
    w.i64s(std::vector<std::int64_t>(raw.events.begin(), raw.events.end()));
    w.strs(raw.subgroup_names);
    for (const auto& labels : raw.subgroup_labels) w.strs(labels);
    if (!os) throw std::runtime_error("failed writing dataset cache: " + path.string());
}

DatasetCache load_dataset_cache(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read dataset cache: " + path.string());
    binio::Reader r(is);
    r.expect_magic(kCacheMagic);
    if (const auto v = r.u32(); v != kCacheVersion)
        throw std::runtime_error("unsupported dataset cache version " + std::to_string(v));
    DatasetCache c;
    c.schema = Schema::from_kv(KeyValues::parse(r.str(), path.string() + " (schema)"));
    c.options = PreprocessOptions::from_kv(KeyValues::parse(r.str(), path.string() + " (options)"));
    RawDataset& raw = c.raw;
    raw.ids = r.strs();
    const auto nf = r.u64();
    for (std::uint64_t i = 0; i < nf; ++i) {
        FeatureColumn f;
        f.name = r.str();
        f.source = r.str();
        f.continuous = r.u32() != 0;
        raw.features.push_back(std::move(f));
    }
    raw.x = r.matrix();
    raw.durations = r.f64s();
    for (auto e : r.i64s()) raw.events.push_back(static_cast<int>(e));
    raw.subgroup_names = r.strs();
    for (std::size_t g = 0; g < raw.subgroup_names.size(); ++g) raw.subgroup_labels.push_back(r.strs());
    return c;
}

void write_survival_set(std::ostream& os, const SurvivalSet& set) {
    binio::Writer w(os);
    w.strs(set.ids);
    w.matrix(set.x);
    w.i64s(std::vector<std::int64_t>(set.bins.begin(), set.bins.end()));
    w.i64s(std::vector<std::int64_t>(set.events.begin(), set.events.end()));
    w.f64s(set.durations);
    w.u64(set.subgroups.size());
    for (const auto& row : set.subgroups) w.strs(row);
}

}  // namespace moesurv
