#include "doctest.h"

#include <map>
#include <regex>
#include <sstream>
#include <stack>

#include "moesurv/error.hpp"
#include "moesurv/report.hpp"

using namespace moesurv;
using Eigen::MatrixXd;

namespace {

/// Tags open and close in order; returns false on any mismatch.
bool balanced_xml(const std::string& s) {
    std::stack<std::string> open;
    const std::regex tag(R"(<(/?)([a-zA-Z]+)[^>]*?(/?)>)");
    for (auto it = std::sregex_iterator(s.begin(), s.end(), tag); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        if (m[3] == "/") continue;
        if (m[1] == "/") {
            if (open.empty() || open.top() != m[2]) return false;
            open.pop();
        } else {
            open.push(m[2]);
        }
    }
    return open.empty();
}

RoutingExport sample_export() {
    RoutingExport ex;
    ex.ids = {"a", "b", "c", "d"};
    ex.subgroup_names = {"ER", "HER2"};
    ex.subgroup_labels = {{"Positive", "Negative"}, {"Negative", "Negative"}, {"Positive", ""}, {"Positive", "Positive"}};
    ex.pi_feat = MatrixXd(4, 3);
    ex.pi_feat << 0.2, 0.3, 0.5, 0.6, 0.2, 0.2, 0.1, 0.1, 0.8, 1.0 / 3, 1.0 / 3, 1.0 / 3;
    ex.bins = 2;
    ex.pi_haz = MatrixXd(8, 2);
    ex.pi_haz << 0.5, 0.5, 0.9, 0.1, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4, 0.6, 0.4, 0.1, 0.9, 0.0, 1.0;
    return ex;
}

}  // namespace

TEST_CASE("CSV quoting") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    std::ostringstream os;
    write_csv_row(os, {"x", "y,z"});
    CHECK(os.str() == "x,\"y,z\"\r\n");
}

TEST_CASE("metric rows mark undefined horizons") {
    Evaluation ev;
    ev.overall = {0.7, 10, 7.0};
    ev.horizons.percentiles = {0.1, 0.2};
    ev.horizons.bins = {1, 2};
    ev.td = {ConcordanceResult{0.8, 5, 4.0}, std::nullopt};
    std::ostringstream os;
    write_metrics_header(os);
    write_metrics_rows(os, 3, "test", ev);
    const std::string s = os.str();
    CHECK(s.find("3,test,cindex,,0.69999999999999996,10") != std::string::npos);
    CHECK(s.find("3,test,td_cindex,0.1,0.80000000000000004,5") != std::string::npos);
    CHECK(s.find("3,test,td_cindex,0.2,NA,0") != std::string::npos);
}

TEST_CASE("subgroup means match a recomputation from patient rows") {
    const RoutingExport ex = sample_export();
    const auto means = subgroup_means(ex, {"ER", "HER2"});
    std::map<std::pair<std::string, std::string>, std::pair<int, Eigen::RowVectorXd>> manual;
    for (std::size_t g = 0; g < 2; ++g)
        for (std::size_t i = 0; i < ex.size(); ++i) {
            const std::string label = ex.subgroup_labels[i][g].empty() ? "NA" : ex.subgroup_labels[i][g];
            auto& slot = manual[{ex.subgroup_names[g], label}];
            if (slot.first == 0) slot.second = Eigen::RowVectorXd::Zero(3);
            ++slot.first;
            slot.second += ex.pi_feat.row(static_cast<Eigen::Index>(i));
        }
    REQUIRE(means.size() == manual.size());
    for (const auto& m : means) {
        const auto& [n, total] = manual.at({m.subgroup, m.label});
        CHECK(m.n == n);
        CHECK((m.mean - total / n).cwiseAbs().maxCoeff() < 1e-15);
    }
    for (const auto& m : means)
        if (m.subgroup == "HER2" && m.label == "Positive") CHECK(m.mean == ex.pi_feat.row(3));

    CHECK_THROWS_AS(subgroup_means(ex, {"PR"}), ConfigError);
    CHECK_THROWS_AS(ex.index_of("zz"), ConfigError);
    CHECK(ex.index_of("c") == 2);
    CHECK(ex.hazard_routing(1) == ex.pi_haz.middleRows(2, 2));
}

TEST_CASE("routing CSV layouts") {
    const RoutingExport ex = sample_export();
    std::ostringstream f, h;
    write_feature_routing_csv(f, ex);
    CHECK(f.str().rfind("patient_id,ER,HER2,expert_1,expert_2,expert_3\r\n", 0) == 0);
    write_hazard_routing_csv(h, ex, {0, 3});
    std::istringstream lines(h.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 1 + 2 * 2);
}

TEST_CASE("SVG charts are well formed") {
    const RoutingExport ex = sample_export();
    const std::string bars = svg_subgroup_bars(subgroup_means(ex, {"ER"}));
    CHECK(balanced_xml(bars));
    for (int k = 1; k <= 3; ++k) CHECK(bars.find("id=\"expert-" + std::to_string(k) + "\"") != std::string::npos);

    MatrixXd pi(3, 3);
    pi << 0.2, 0.3, 0.5, 0.1, 0.1, 0.8, 0.7, 0.2, 0.1;
    const std::string area = svg_hazard_area("p<1>", pi);
    CHECK(balanced_xml(area));
    CHECK(area.find("p&lt;1&gt;") != std::string::npos);

    // The last stacked series reaches the same top y at every bin.
    const std::regex poly("<polygon[^>]*id=\"expert-3\"[^>]*points=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(area, m, poly));
    std::istringstream pts(m[1].str());
    std::string pair;
    std::vector<std::string> ys;
    while (pts >> pair) ys.push_back(pair.substr(pair.find(',') + 1));
    REQUIRE(ys.size() == 6);
    CHECK(ys[0] == ys[1]);
    CHECK(ys[1] == ys[2]);
}

TEST_CASE("summary table marks the anchor") {
    VariantSummary a{"naive", false, 2, 2, {{"cindex", std::nullopt, 0.61, 0.01, 2}}};
    VariantSummary b{"dual", true, 2, 2, {{"cindex", std::nullopt, 0.65, 0.02, 2}}};
    const std::string table = render_summary_table({a, b}, "t");
    CHECK(table.find("dual *") != std::string::npos);
    CHECK(table.find("0.650 ± 0.020") != std::string::npos);
    std::ostringstream csv;
    write_summary_csv(csv, {a, b});
    CHECK(csv.str().find("dual,1,cindex,,") != std::string::npos);
}
