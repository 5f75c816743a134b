#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "moesurv/error.hpp"
#include "moesurv/model.hpp"
#include "moesurv/rng.hpp"

using namespace moesurv;
using Eigen::MatrixXd;

namespace {

DualMoeConfig small_config(int k = 3, int l = 2) {
    DualMoeConfig c;
    c.input_dim = 5;
    c.encoder_depth = 2;
    c.encoder_width = 6;
    c.expert_depth = 1;
    c.expert_width = 5;
    c.latent_dim = 4;
    c.router_depth = 1;
    c.router_width = 4;
    c.hazard_expert_depth = 1;
    c.hazard_expert_width = 5;
    c.num_feature_experts = k;
    c.num_hazard_experts = l;
    c.max_bin = 3;
    c.time_dim = 3;
    return c;
}

MatrixXd random_inputs(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
    Rng rng(seed);
    MatrixXd x(rows, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    return x;
}

/// Plain Eigen evaluation of a ReLU MLP stored under `prefix`.
MatrixXd reference_mlp(const ad::ParameterStore& p, const std::string& prefix, MatrixXd h, int layers, bool relu_last) {
    for (int i = 0; i < layers; ++i) {
        const std::string base = prefix + "." + std::to_string(i);
        h = (h * p.at(base + ".weight").value).rowwise() + p.at(base + ".bias").value.row(0);
        if (i + 1 < layers || relu_last) h = h.cwiseMax(0.0);
    }
    return h;
}

void stub_output(ad::ParameterStore& p, const std::string& prefix, int last, const MatrixXd& bias) {
    p.at(prefix + "." + std::to_string(last) + ".weight").value.setZero();
    p.at(prefix + "." + std::to_string(last) + ".bias").value = bias;
}

}  // namespace

TEST_CASE("presets") {
    const DualMoeConfig m = DualMoeConfig::preset("metabric");
    CHECK(m.encoder_depth == 4);
    CHECK(m.num_feature_experts == 4);
    CHECK(m.num_hazard_experts == 4);
    CHECK(m.time_dim == 8);
    CHECK(m.alpha == 0.3);
    CHECK(m.beta == 0.5);
    const DualMoeConfig g = DualMoeConfig::preset("gbsg");
    CHECK(g.encoder_depth == 3);
    CHECK(g.expert_depth == 2);
    CHECK(g.num_feature_experts == 6);
    CHECK(g.num_hazard_experts == 3);
    CHECK_THROWS_AS(DualMoeConfig::preset("other"), ConfigError);
}

TEST_CASE("config key-value round trip") {
    DualMoeConfig c = small_config();
    c.hazard_router_input = RouterInput::TimeOnly;
    c.feature_moe = false;
    const DualMoeConfig back = DualMoeConfig::from_kv(c.to_kv());
    CHECK(back.to_kv().str() == c.to_kv().str());
    KeyValues bad;
    bad.set("num_feature_experts", "0");
    CHECK_THROWS_AS(DualMoeConfig::from_kv(bad), ConfigError);
    KeyValues unknown;
    unknown.set("nonsense", "1");
    CHECK_THROWS_AS(DualMoeConfig::from_kv(unknown), ConfigError);
}

TEST_CASE("a single feature expert gets weight exactly one") {
    DualMoeConfig c = small_config(1, 2);
    DualMoeModel m(c, 1);
    const BatchPrediction p = m.batch_forward(random_inputs(2, 4, 5));
    CHECK(p.pi_feat == MatrixXd::Ones(4, 1));
    c.feature_moe = false;
    DualMoeModel off(c, 1);
    CHECK(off.batch_forward(random_inputs(2, 4, 5)).pi_feat == MatrixXd::Ones(4, 1));
}

TEST_CASE("zeroed router mixes experts uniformly") {
    DualMoeConfig c = small_config(4, 2);
    DualMoeModel m(c, 3);
    stub_output(m.params(), "feature_router", c.router_depth, MatrixXd::Zero(1, 4));
    const MatrixXd x = random_inputs(4, 3, 5);
    ad::Graph g;
    const ForwardResult out = m.forward_inference(g, x);
    CHECK((out.pi_feat.value().array() == 0.25).all());

    const MatrixXd h = reference_mlp(m.params(), "encoder", x, c.encoder_depth, true);
    MatrixXd mean = MatrixXd::Zero(3, c.latent_dim);
    for (int k = 0; k < 4; ++k)
        mean += reference_mlp(m.params(), "feature_expert." + std::to_string(k), h, c.expert_depth + 1, false) / 4.0;
    CHECK((out.z.value() - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stubbed feature experts mix with router weights") {
    DualMoeConfig c = small_config(2, 2);
    DualMoeModel m(c, 5);
    MatrixXd a(1, 4), b(1, 4);
    a << 1, -2, 0.5, 3;
    b << -1, 4, 2, 0;
    stub_output(m.params(), "feature_expert.0", c.expert_depth, a);
    stub_output(m.params(), "feature_expert.1", c.expert_depth, b);
    MatrixXd logits(1, 2);
    logits << std::log(0.3), std::log(0.7);
    stub_output(m.params(), "feature_router", c.router_depth, logits);
    const EncodedRepresentation enc = m.encode(std::vector<double>{0.1, -0.2, 0.3, 1.0, 2.0});
    CHECK(enc.pi_feat[0] == doctest::Approx(0.3).epsilon(1e-14));
    for (int j = 0; j < 4; ++j)
        CHECK(enc.z[static_cast<std::size_t>(j)] == doctest::Approx(0.3 * a(0, j) + 0.7 * b(0, j)).epsilon(1e-12));
}

TEST_CASE("hazard routing with a single expert") {
    DualMoeConfig c = small_config(2, 1);
    DualMoeModel m(c, 7);
    const BatchPrediction p = m.batch_forward(random_inputs(8, 3, 5));
    CHECK(p.pi_haz == MatrixXd::Ones(3 * c.bins(), 1));
}

TEST_CASE("zero expert logits give hazard one half") {
    DualMoeConfig c = small_config(2, 3);
    DualMoeModel m(c, 9);
    for (int l = 0; l < 3; ++l)
        stub_output(m.params(), "hazard_expert." + std::to_string(l), c.hazard_expert_depth, MatrixXd::Zero(1, 1));
    const BatchPrediction p = m.batch_forward(random_inputs(10, 4, 5));
    CHECK((p.hazard.array() == 0.5).all());
}

TEST_CASE("opposite expert logits under even routing cancel") {
    DualMoeConfig c = small_config(2, 2);
    DualMoeModel m(c, 11);
    stub_output(m.params(), "hazard_expert.0", c.hazard_expert_depth, MatrixXd::Constant(1, 1, 2.0));
    stub_output(m.params(), "hazard_expert.1", c.hazard_expert_depth, MatrixXd::Constant(1, 1, -2.0));
    stub_output(m.params(), "hazard_router", c.router_depth, MatrixXd::Zero(1, 2));
    const BatchPrediction p = m.batch_forward(random_inputs(12, 2, 5));
    CHECK((p.hazard.array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("batch and single-row predictions agree") {
    DualMoeModel m(small_config(), 13);
    const MatrixXd x = random_inputs(14, 8, 5);
    const BatchPrediction batch = m.batch_forward(x);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < 8; ++i) {
        std::vector<double> row(5);
        for (Eigen::Index j = 0; j < 5; ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        const HazardCurve single = m.predict_curve(row);
        const HazardCurve from_batch = batch.curve(static_cast<std::size_t>(i));
        for (std::size_t t = 0; t < single.hazard.size(); ++t)
            worst = std::max(worst, std::abs(single.hazard[t] - from_batch.hazard[t]));
        const auto [curve, trace] = m.hazard_forward(m.encode(row));
        CHECK((trace.pi_haz - batch.trace(static_cast<std::size_t>(i)).pi_haz).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("routing probabilities are distributions") {
    DualMoeModel m(small_config(3, 4), 15);
    const BatchPrediction p = m.batch_forward(random_inputs(16, 6, 5));
    CHECK((p.pi_feat.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((p.pi_haz.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((p.hazard.array() > 0.0).all());
    CHECK((p.hazard.array() < 1.0).all());
}

TEST_CASE("router input modes") {
    DualMoeConfig c = small_config(2, 3);
    const MatrixXd x = random_inputs(17, 4, 5);
    const Eigen::Index t = c.bins();

    c.hazard_router_input = RouterInput::TimeOnly;
    const BatchPrediction time_only = DualMoeModel(c, 1).batch_forward(x);
    for (Eigen::Index i = 1; i < 4; ++i)
        CHECK(time_only.pi_haz.middleRows(i * t, t) == time_only.pi_haz.topRows(t));

    c.hazard_router_input = RouterInput::FeaturesOnly;
    const BatchPrediction features_only = DualMoeModel(c, 1).batch_forward(x);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index s = 1; s < t; ++s)
            CHECK(features_only.pi_haz.row(i * t + s) == features_only.pi_haz.row(i * t));

    c.hazard_router_input = RouterInput::Both;
    const BatchPrediction both = DualMoeModel(c, 1).batch_forward(x);
    CHECK(both.pi_haz.row(0) != both.pi_haz.row(1));
    CHECK(both.pi_haz.row(0) != both.pi_haz.row(t));
}

TEST_CASE("single-expert MoE matches the plain network with the same weights") {
    DualMoeConfig on = small_config(1, 1);
    DualMoeConfig off = on;
    off.feature_moe = false;
    off.hazard_moe = false;
    DualMoeModel moe(on, 21);
    DualMoeModel plain(off, 22);
    for (auto& p : plain.params()) p.value = moe.params().at(p.name).value;
    const MatrixXd x = random_inputs(23, 5, 5);
    CHECK(moe.batch_forward(x).hazard == plain.batch_forward(x).hazard);
    CHECK(plain.params().size() < moe.params().size());
    CHECK_FALSE(plain.params().contains("feature_router.0.weight"));
    CHECK_FALSE(plain.params().contains("hazard_router.0.weight"));
}

TEST_CASE("forward errors") {
    DualMoeModel m(small_config(), 1);
    CHECK_THROWS_AS(m.batch_forward(MatrixXd(0, 5)), UsageError);
    CHECK_THROWS_AS(m.batch_forward(MatrixXd::Zero(2, 4)), ConfigError);
    ad::ParameterStore wrong = DualMoeModel(small_config(2, 2), 1).params();
    CHECK_THROWS_AS(DualMoeModel(small_config(), std::move(wrong)), ConfigError);
}

TEST_CASE("initialisation is seeded") {
    DualMoeModel a(small_config(), 4), b(small_config(), 4), c(small_config(), 5);
    CHECK(a.params().at("encoder.0.weight").value == b.params().at("encoder.0.weight").value);
    CHECK(a.params().at("encoder.0.weight").value != c.params().at("encoder.0.weight").value);
    CHECK((a.params().at("encoder.0.bias").value.array() == 0.0).all());
}
