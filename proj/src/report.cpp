#include "moesurv/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "moesurv/error.hpp"

namespace moesurv {

using Eigen::Index;

namespace {

const char* const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string percentile_label(double p) { return fixed(p, 1); }

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string svg_open() {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\" width=\"800\" height=\"400\" "
           "font-family=\"sans-serif\" font-size=\"12\">\n"
           "<rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"white\"/>\n";
}

// Plot area shared by both charts.
constexpr double kLeft = 60, kRight = 650, kTop = 40, kBottom = 340;

double y_of(double v) { return kBottom - v * (kBottom - kTop); }

std::string y_axis(const std::string& label) {
    std::ostringstream os;
    os << "<g class=\"axis\">\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kBottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\"" << kBottom
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(y_of(v) + 4, 2) << "\" text-anchor=\"end\">"
           << fixed(v, 2) << "</text>\n";
    }
    os << "<text x=\"16\" y=\"" << (kTop + kBottom) / 2 << "\" transform=\"rotate(-90 16 " << (kTop + kBottom) / 2
       << ")\" text-anchor=\"middle\">" << xml_escape(label) << "</text>\n";
    os << "</g>\n";
    return os.str();
}

std::string legend(const std::string& prefix, Index n) {
    std::ostringstream os;
    os << "<g class=\"legend\">\n";
    for (Index k = 0; k < n; ++k) {
        const double y = kTop + 20.0 * static_cast<double>(k);
        os << "<rect x=\"670\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[k % 8] << "\"/>\n";
        os << "<text x=\"688\" y=\"" << y + 10 << "\">" << prefix << ' ' << k + 1 << "</text>\n";
    }
    os << "</g>\n";
    return os.str();
}

}  // namespace

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
    os << "\r\n";
}

void write_metrics_header(std::ostream& os) {
    write_csv_row(os, {"seed", "split", "metric", "horizon_percentile", "value", "n_pairs"});
}

void write_metrics_rows(std::ostream& os, std::uint64_t seed, const std::string& split, const Evaluation& ev) {
    const std::string s = std::to_string(seed);
    write_csv_row(os, {s, split, "cindex", "", format_double(ev.overall.value),
                       std::to_string(ev.overall.comparable_pairs)});
    for (std::size_t h = 0; h < ev.td.size(); ++h) {
        const std::string p = percentile_label(ev.horizons.percentiles[h]);
        if (ev.td[h])
            write_csv_row(os, {s, split, "td_cindex", p, format_double(ev.td[h]->value),
                               std::to_string(ev.td[h]->comparable_pairs)});
        else
            write_csv_row(os, {s, split, "td_cindex", p, "NA", "0"});
    }
}

void write_training_log(std::ostream& os, const std::vector<EpochLog>& log) {
    write_csv_row(os, {"epoch", "nll", "lb_feat", "lb_haz", "total", "val_cindex"});
    for (const auto& e : log)
        write_csv_row(os, {std::to_string(e.epoch), format_double(e.loss.nll), format_double(e.loss.lb_feat),
                           format_double(e.loss.lb_haz), format_double(e.loss.total),
                           e.val_cindex ? format_double(*e.val_cindex) : ""});
}

void write_summary_csv(std::ostream& os, const std::vector<VariantSummary>& summary) {
    write_csv_row(os, {"variant", "anchor", "metric", "horizon_percentile", "mean", "std", "n_runs", "attempted"});
    for (const auto& v : summary)
        for (const auto& m : v.metrics)
            write_csv_row(os, {v.name, v.anchor ? "1" : "0", m.metric,
                               m.percentile ? percentile_label(*m.percentile) : "",
                               m.n ? format_double(m.mean) : "NA", m.n ? format_double(m.std) : "NA",
                               std::to_string(m.n), std::to_string(v.attempted)});
}

std::string render_summary_table(const std::vector<VariantSummary>& summary, const std::string& title) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"variant", "runs", "C-index"};
    if (!summary.empty())
        for (const auto& m : summary.front().metrics)
            if (m.percentile) header.push_back("td@" + std::to_string(static_cast<int>(std::lround(*m.percentile * 100))) + "%");
    rows.push_back(header);
    for (const auto& v : summary) {
        std::vector<std::string> row = {v.name + (v.anchor ? " *" : ""),
                                        std::to_string(v.completed) + "/" + std::to_string(v.attempted)};
        for (const auto& m : v.metrics)
            row.push_back(m.n ? fixed(m.mean, 3) + " ± " + fixed(m.std, 3) : "NA");
        rows.push_back(row);
    }
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char c : s) w += (c & 0xC0) != 0x80;
        return w;
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size() && c < widths.size(); ++c) widths[c] = std::max(widths[c], width(r[c]));
    std::ostringstream os;
    os << title << "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size() && c < widths.size(); ++c) {
            const std::string& cell = rows[r][c];
            const std::string pad(widths[c] - width(cell), ' ');
            os << (c ? "  " : "") << (c == 0 ? cell + pad : pad + cell);
        }
        os << "\n";
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : widths) total += w;
            os << std::string(total + 2 * (widths.size() - 1), '-') << "\n";
        }
    }
    if (std::any_of(summary.begin(), summary.end(), [](const VariantSummary& v) { return v.anchor; }))
        os << "* comparison anchor\n";
    return os.str();
}

// ---------------------------------------------------------------- routing

RoutingExport RoutingExport::from_prediction(const SurvivalSet& set, const BatchPrediction& pred,
                                             const std::vector<std::string>& subgroup_names) {
    if (pred.size() != set.size()) throw ConfigError("routing export: prediction and data sizes differ");
    RoutingExport ex;
    ex.ids = set.ids;
    ex.subgroup_names = subgroup_names;
    ex.subgroup_labels = set.subgroups;
    ex.pi_feat = pred.pi_feat;
    ex.pi_haz = pred.pi_haz;
    ex.bins = static_cast<int>(pred.hazard.cols());
    return ex;
}

std::size_t RoutingExport::index_of(const std::string& id) const {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it != ids.end()) return static_cast<std::size_t>(it - ids.begin());
    std::string avail;
    for (std::size_t i = 0; i < ids.size(); ++i) avail += (i ? ", " : "") + ids[i];
    throw ConfigError("unknown patient id '" + id + "'; available: " + avail);
}

Eigen::MatrixXd RoutingExport::hazard_routing(std::size_t row) const {
    return pi_haz.middleRows(static_cast<Index>(row) * bins, bins);
}

std::vector<SubgroupMean> subgroup_means(const RoutingExport& ex, const std::vector<std::string>& subgroups) {
    std::vector<SubgroupMean> out;
    for (const auto& name : subgroups) {
        const auto it = std::find(ex.subgroup_names.begin(), ex.subgroup_names.end(), name);
        if (it == ex.subgroup_names.end()) {
            std::string avail;
            for (std::size_t i = 0; i < ex.subgroup_names.size(); ++i)
                avail += (i ? ", " : "") + ex.subgroup_names[i];
            throw ConfigError("unknown subgroup '" + name + "'; available: " + (avail.empty() ? "(none)" : avail));
        }
        const auto g = static_cast<std::size_t>(it - ex.subgroup_names.begin());
        std::map<std::string, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < ex.size(); ++i) members[ex.subgroup_labels[i][g]].push_back(i);
        for (const auto& [label, rows] : members) {
            SubgroupMean m;
            m.subgroup = name;
            m.label = label.empty() ? "NA" : label;
            m.n = static_cast<int>(rows.size());
            m.mean = Eigen::RowVectorXd::Zero(ex.pi_feat.cols());
            for (std::size_t i : rows) m.mean += ex.pi_feat.row(static_cast<Index>(i));
            m.mean /= static_cast<double>(rows.size());
            out.push_back(std::move(m));
        }
    }
    return out;
}

void write_feature_routing_csv(std::ostream& os, const RoutingExport& ex) {
    std::vector<std::string> header = {"patient_id"};
    header.insert(header.end(), ex.subgroup_names.begin(), ex.subgroup_names.end());
    for (Index k = 0; k < ex.pi_feat.cols(); ++k) header.push_back("expert_" + std::to_string(k + 1));
    write_csv_row(os, header);
    for (std::size_t i = 0; i < ex.size(); ++i) {
        std::vector<std::string> row = {ex.ids[i]};
        row.insert(row.end(), ex.subgroup_labels[i].begin(), ex.subgroup_labels[i].end());
        for (Index k = 0; k < ex.pi_feat.cols(); ++k) row.push_back(format_double(ex.pi_feat(static_cast<Index>(i), k)));
        write_csv_row(os, row);
    }
}

void write_subgroup_means_csv(std::ostream& os, const std::vector<SubgroupMean>& means) {
    std::vector<std::string> header = {"subgroup", "label", "n"};
    const Index k = means.empty() ? 0 : means.front().mean.size();
    for (Index j = 0; j < k; ++j) header.push_back("expert_" + std::to_string(j + 1));
    write_csv_row(os, header);
    for (const auto& m : means) {
        std::vector<std::string> row = {m.subgroup, m.label, std::to_string(m.n)};
        for (Index j = 0; j < m.mean.size(); ++j) row.push_back(format_double(m.mean(j)));
        write_csv_row(os, row);
    }
}

void write_hazard_routing_csv(std::ostream& os, const RoutingExport& ex, const std::vector<std::size_t>& rows) {
    std::vector<std::string> header = {"patient_id", "time_bin"};
    for (Index l = 0; l < ex.pi_haz.cols(); ++l) header.push_back("expert_" + std::to_string(l + 1));
    write_csv_row(os, header);
    for (std::size_t i : rows) {
        const Eigen::MatrixXd m = ex.hazard_routing(i);
        for (Index t = 0; t < m.rows(); ++t) {
            std::vector<std::string> row = {ex.ids[i], std::to_string(t)};
            for (Index l = 0; l < m.cols(); ++l) row.push_back(format_double(m(t, l)));
            write_csv_row(os, row);
        }
    }
}

std::string svg_subgroup_bars(const std::vector<SubgroupMean>& means) {
    std::ostringstream os;
    os << svg_open();
    os << "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << "Mean feature-expert routing by subgroup</text>\n";
    os << y_axis("routing probability");
    const Index k = means.empty() ? 0 : means.front().mean.size();
    const double group_w = means.empty() ? 0.0 : (kRight - kLeft) / static_cast<double>(means.size());
    const double bar_w = k ? group_w * 0.8 / static_cast<double>(k) : 0.0;
    for (Index j = 0; j < k; ++j) {
        os << "<g class=\"series\" id=\"expert-" << j + 1 << "\" fill=\"" << kPalette[j % 8] << "\">\n";
        for (std::size_t g = 0; g < means.size(); ++g) {
            const double v = means[g].mean(j);
            const double x = kLeft + group_w * static_cast<double>(g) + group_w * 0.1 + bar_w * static_cast<double>(j);
            os << "<rect x=\"" << fixed(x, 2) << "\" y=\"" << fixed(y_of(v), 2) << "\" width=\"" << fixed(bar_w, 2)
               << "\" height=\"" << fixed(kBottom - y_of(v), 2) << "\"><title>" << xml_escape(means[g].subgroup)
               << ' ' << xml_escape(means[g].label) << ", expert " << j + 1 << ": " << fixed(v, 4)
               << "</title></rect>\n";
        }
        os << "</g>\n";
    }
    for (std::size_t g = 0; g < means.size(); ++g) {
        const double cx = kLeft + group_w * (static_cast<double>(g) + 0.5);
        os << "<text x=\"" << fixed(cx, 2) << "\" y=\"" << kBottom + 18 << "\" text-anchor=\"middle\">"
           << xml_escape(means[g].subgroup + " " + means[g].label) << "</text>\n";
    }
    os << legend("expert", k);
    os << "</svg>\n";
    return os.str();
}

std::string svg_hazard_area(const std::string& patient_id, const Eigen::MatrixXd& pi_haz) {
    const Index t_count = pi_haz.rows();
    const Index l_count = pi_haz.cols();
    // cum(t, l) is the stack top after expert l.
    Eigen::MatrixXd cum(t_count, l_count);
    for (Index t = 0; t < t_count; ++t) {
        const double total = pi_haz.row(t).sum();
        double acc = 0.0;
        for (Index l = 0; l < l_count; ++l) {
            acc += pi_haz(t, l);
            cum(t, l) = l + 1 == l_count ? 1.0 : acc / total;
        }
    }
    auto x_of = [&](Index t) {
        return t_count > 1 ? kLeft + (kRight - kLeft) * static_cast<double>(t) / static_cast<double>(t_count - 1)
                           : (kLeft + kRight) / 2;
    };
    std::ostringstream os;
    os << svg_open();
    os << "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Hazard-expert routing over time, patient "
       << xml_escape(patient_id) << "</text>\n";
    os << y_axis("routing probability");
    for (Index l = 0; l < l_count; ++l) {
        std::ostringstream pts;
        for (Index t = 0; t < t_count; ++t) pts << fixed(x_of(t), 2) << ',' << fixed(y_of(cum(t, l)), 4) << ' ';
        for (Index t = t_count - 1; t >= 0; --t) {
            const double lower = l == 0 ? 0.0 : cum(t, l - 1);
            pts << fixed(x_of(t), 2) << ',' << fixed(y_of(lower), 4) << (t ? " " : "");
        }
        os << "<polygon class=\"series\" id=\"expert-" << l + 1 << "\" fill=\"" << kPalette[l % 8]
           << "\" points=\"" << pts.str() << "\"/>\n";
    }
    for (Index t = 0; t < t_count; ++t)
        os << "<text x=\"" << fixed(x_of(t), 2) << "\" y=\"" << kBottom + 16 << "\" text-anchor=\"middle\">" << t
           << "</text>\n";
    os << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kBottom + 36
       << "\" text-anchor=\"middle\">time bin</text>\n";
    os << legend("expert", l_count);
    os << "</svg>\n";
    return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace moesurv
