#pragma once

// Clinical survival table ingestion and per-seed preprocessing:
// CSV -> RawDataset (one-hot expanded, missing continuous cells as NaN)
//     -> split by seed -> impute/standardize with train statistics
//     -> discretize durations with a grid fit on the train split.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "moesurv/keyvalue.hpp"

namespace moesurv {

using Matrix = Eigen::MatrixXd;

struct SubgroupSpec {
    std::string alias;   ///< name used on the command line, e.g. "ER"
    std::string column;  ///< CSV column
    bool subgroup_only = false;  ///< excluded from model inputs when true
};

/// Column roles. Columns that are neither declared categorical, excluded,
/// nor one of the id/duration/event columns are continuous features.
struct Schema {
    std::string duration_column = "duration";
    std::string event_column = "event";
    std::string id_column;  ///< optional
    std::vector<std::string> categorical;
    std::vector<std::string> exclude;
    std::vector<SubgroupSpec> subgroups;

    /// Keys: duration, event, id, categorical, exclude, subgroups
    /// (`ALIAS:column` items), subgroup_only.
    static Schema from_kv(const KeyValues& kv);
    static Schema load(const std::filesystem::path& path);
    KeyValues to_kv() const;
};

struct FeatureColumn {
    std::string name;    ///< `col` or `col=level` for one-hot columns
    std::string source;  ///< CSV column it came from
    bool continuous = true;
};

struct RawDataset {
    std::vector<std::string> ids;
    std::vector<FeatureColumn> features;
    Matrix x;  ///< rows x features, NaN marks a missing continuous cell
    std::vector<double> durations;
    std::vector<int> events;
    std::vector<std::string> subgroup_names;                ///< aliases
    std::vector<std::vector<std::string>> subgroup_labels;  ///< [subgroup][row]

    std::size_t rows() const { return durations.size(); }
    double censored_fraction() const;
};

/// Throws IngestionError (with row/column) on missing columns, unparseable
/// cells, negative durations, events outside {0,1} or an empty file.
RawDataset load_csv(const std::filesystem::path& path, const Schema& schema);
RawDataset parse_csv(std::istream& in, const Schema& schema, const std::string& source = "<csv>");

/// RFC-4180 record splitter (quoted fields, doubled quotes, CRLF).
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

enum class BinScheme { Quantile, Uniform };
BinScheme parse_bin_scheme(const std::string& s);
std::string to_string(BinScheme s);

/// `cuts` has max_bin ascending entries. A duration d maps to the number of
/// cuts strictly below it, clamped to max_bin, so bin t covers
/// (cuts[t-1], cuts[t]] and the final bin holds everything past the last cut.
struct DiscretizationGrid {
    std::vector<double> cuts;

    int max_bin() const { return static_cast<int>(cuts.size()); }
    int bin_of(double duration) const;
    /// Upper time edge of each bin; the final bin is open (+inf).
    std::vector<double> bin_upper_edges() const;
};

/// Quantile: cuts at the k/max_bin empirical quantiles (linear interpolation)
/// of the durations, recomputed over distinct values if ties collapse cuts.
/// Uniform: cuts at min + k(max-min)/max_bin. k = 1..max_bin in both.
/// Throws ConfigError for max_bin < 2, all-equal durations, or too few
/// distinct durations for the quantile scheme.
DiscretizationGrid fit_discretization(std::span<const double> durations, int max_bin, BinScheme scheme);

/// Train-split statistics: imputation medians and z-score parameters.
struct FeatureStats {
    std::vector<double> median;
    std::vector<double> mean;
    std::vector<double> stddev;  ///< population std; 0 marks a constant column
    std::vector<bool> continuous;
    std::vector<std::string> warnings;
};

FeatureStats fit_feature_stats(const Matrix& x_train, std::span<const FeatureColumn> features);
/// Imputes missing continuous cells with the train median, then z-scores
/// continuous columns (constant columns become 0). One-hot columns pass
/// through, with missing cells (NaN) set to 0.
Matrix apply_feature_stats(const Matrix& x, const FeatureStats& stats);

struct SplitFractions {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Seeded Fisher-Yates shuffle, then contiguous segments of
/// round(n*train) and round(n*val) rows; each segment sorted ascending.
SplitIndices split_indices(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

struct PatientRecord {
    std::string id;
    std::vector<double> x;
    int bin = 0;  ///< discretized observed time
    int event = 0;
    double duration = 0.0;
    std::vector<std::string> subgroups;
};

/// Model-ready rows in matrix form.
struct SurvivalSet {
    std::vector<std::string> ids;
    Matrix x;
    std::vector<int> bins;
    std::vector<int> events;
    std::vector<double> durations;
    std::vector<std::vector<std::string>> subgroups;  ///< [row][subgroup]

    std::size_t size() const { return bins.size(); }
    PatientRecord record(std::size_t i) const;
    SurvivalSet subset(std::span<const std::size_t> rows) const;
};

SurvivalSet make_survival_set(const RawDataset& raw, std::span<const std::size_t> rows,
                              const FeatureStats& stats, const DiscretizationGrid& grid);

struct PreprocessOptions {
    int max_bin = 19;
    BinScheme scheme = BinScheme::Quantile;
    SplitFractions fractions;

    KeyValues to_kv() const;
    static PreprocessOptions from_kv(const KeyValues& kv);
};

struct PreparedSplit {
    SplitIndices indices;
    FeatureStats stats;
    DiscretizationGrid grid;
    SurvivalSet train;
    SurvivalSet val;
    SurvivalSet test;
};

/// Everything fit on the train split only, reused verbatim for val/test.
PreparedSplit prepare_split(const RawDataset& raw, const PreprocessOptions& options, std::uint64_t seed);

/// Processed-dataset cache (dataset.bin): the ingested table plus the
/// preprocessing options. Per-seed statistics are refit from it on demand.
struct DatasetCache {
    RawDataset raw;
    PreprocessOptions options;
    Schema schema;
};

void save_dataset_cache(const std::filesystem::path& path, const DatasetCache& cache);
DatasetCache load_dataset_cache(const std::filesystem::path& path);

/// Byte serialization of a SurvivalSet (used for determinism checks).
void write_survival_set(std::ostream& os, const SurvivalSet& set);

}  // namespace moesurv
