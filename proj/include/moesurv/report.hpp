#pragma once

// Artifact writers: metric reports, training logs, grid summaries, routing
// exports and their SVG charts.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "moesurv/data.hpp"
#include "moesurv/model.hpp"
#include "moesurv/trainer.hpp"

namespace moesurv {

/// RFC-4180 quoting when the field contains a comma, quote or newline.
std::string csv_field(std::string_view s);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

/// Columns: seed, split, metric, horizon_percentile, value, n_pairs.
void write_metrics_header(std::ostream& os);
void write_metrics_rows(std::ostream& os, std::uint64_t seed, const std::string& split, const Evaluation& ev);

/// Columns: epoch, nll, lb_feat, lb_haz, total, val_cindex.
void write_training_log(std::ostream& os, const std::vector<EpochLog>& log);

/// Columns: variant, anchor, metric, horizon_percentile, mean, std, n_runs, attempted.
void write_summary_csv(std::ostream& os, const std::vector<VariantSummary>& summary);
/// Aligned text: one row per variant, "mean ± std" cells.
std::string render_summary_table(const std::vector<VariantSummary>& summary, const std::string& title);

struct RoutingExport {
    std::vector<std::string> ids;
    std::vector<std::string> subgroup_names;
    std::vector<std::vector<std::string>> subgroup_labels;  ///< [row][subgroup]
    Eigen::MatrixXd pi_feat;                               ///< N x K
    Eigen::MatrixXd pi_haz;                                ///< (N*bins) x L, row i*bins + t
    int bins = 0;

    static RoutingExport from_prediction(const SurvivalSet& set, const BatchPrediction& pred,
                                         const std::vector<std::string>& subgroup_names);
    std::size_t size() const { return ids.size(); }
    /// Throws ConfigError listing the available ids.
    std::size_t index_of(const std::string& id) const;
    Eigen::MatrixXd hazard_routing(std::size_t row) const;  ///< bins x L
};

struct SubgroupMean {
    std::string subgroup;
    std::string label;
    int n = 0;
    Eigen::RowVectorXd mean;  ///< K
};

/// Mean pi_feat per label of each requested subgroup, labels sorted.
/// Throws ConfigError naming the available subgroups for an unknown one.
std::vector<SubgroupMean> subgroup_means(const RoutingExport& ex, const std::vector<std::string>& subgroups);

/// Columns: patient_id, <subgroups...>, expert_1..expert_K.
void write_feature_routing_csv(std::ostream& os, const RoutingExport& ex);
/// Columns: subgroup, label, n, expert_1..expert_K.
void write_subgroup_means_csv(std::ostream& os, const std::vector<SubgroupMean>& means);
/// Columns: patient_id, time_bin, expert_1..expert_L.
void write_hazard_routing_csv(std::ostream& os, const RoutingExport& ex, const std::vector<std::size_t>& rows);

/// Grouped bars: one group per (subgroup, label), one series per expert.
std::string svg_subgroup_bars(const std::vector<SubgroupMean>& means);
/// Stacked areas over time bins, one series per expert; each column
/// is normalised by its row sum so the stack tops out at exactly 1.
std::string svg_hazard_area(const std::string& patient_id, const Eigen::MatrixXd& pi_haz);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace moesurv
