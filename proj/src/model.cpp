#include "moesurv/model.hpp"

#include <cmath>

#include "moesurv/error.hpp"
#include "moesurv/rng.hpp"

namespace moesurv {

using ad::Graph;
using ad::Var;
using Eigen::Index;
using Eigen::MatrixXd;

RouterInput parse_router_input(const std::string& s) {
    if (s == "both") return RouterInput::Both;
    if (s == "features_only") return RouterInput::FeaturesOnly;
    if (s == "time_only") return RouterInput::TimeOnly;
    throw ConfigError("unknown hazard router input '" + s + "' (expected features_only, time_only or both)");
}

std::string to_string(RouterInput r) {
    switch (r) {
        case RouterInput::FeaturesOnly: return "features_only";
        case RouterInput::TimeOnly: return "time_only";
        case RouterInput::Both: break;
    }
    return "both";
}

// ---------------------------------------------------------------- config

void DualMoeConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("model config: " + msg);
    };
    need(input_dim >= 1, "input_dim must be >= 1");
    need(encoder_depth >= 0 && expert_depth >= 0 && router_depth >= 0 && hazard_expert_depth >= 0,
         "depths must be >= 0");
    need(encoder_width >= 1 && expert_width >= 1 && latent_dim >= 1 && router_width >= 1 &&
             hazard_expert_width >= 1,
         "widths must be >= 1");
    need(num_feature_experts >= 1, "num_feature_experts (K) must be >= 1");
    need(num_hazard_experts >= 1, "num_hazard_experts (L) must be >= 1");
    need(max_bin >= 1, "max_bin must be >= 1");
    need(time_dim >= 1, "time_dim must be >= 1");
    need(std::isfinite(alpha) && alpha >= 0, "alpha must be finite and >= 0");
    need(std::isfinite(beta) && beta >= 0, "beta must be finite and >= 0");
}

KeyValues DualMoeConfig::to_kv() const {
    KeyValues kv;
    kv.set("input_dim", std::to_string(input_dim));
    kv.set("encoder_depth", std::to_string(encoder_depth));
    kv.set("encoder_width", std::to_string(encoder_width));
    kv.set("expert_depth", std::to_string(expert_depth));
    kv.set("expert_width", std::to_string(expert_width));
    kv.set("latent_dim", std::to_string(latent_dim));
    kv.set("router_depth", std::to_string(router_depth));
    kv.set("router_width", std::to_string(router_width));
    kv.set("hazard_expert_depth", std::to_string(hazard_expert_depth));
    kv.set("hazard_expert_width", std::to_string(hazard_expert_width));
    kv.set("num_feature_experts", std::to_string(num_feature_experts));
    kv.set("num_hazard_experts", std::to_string(num_hazard_experts));
    kv.set("max_bin", std::to_string(max_bin));
    kv.set("time_dim", std::to_string(time_dim));
    kv.set("alpha", format_double(alpha));
    kv.set("beta", format_double(beta));
    kv.set("feature_moe", feature_moe ? "true" : "false");
    kv.set("hazard_moe", hazard_moe ? "true" : "false");
    kv.set("hazard_router_input", to_string(hazard_router_input));
    return kv;
}

DualMoeConfig DualMoeConfig::from_kv(const KeyValues& kv) {
    kv.require_known({"preset", "input_dim", "encoder_depth", "encoder_width", "expert_depth", "expert_width",
                      "latent_dim", "router_depth", "router_width", "hazard_expert_depth", "hazard_expert_width",
                      "num_feature_experts", "num_hazard_experts", "max_bin", "time_dim", "alpha", "beta",
                      "feature_moe", "hazard_moe", "hazard_router_input"},
                     "model config");
    DualMoeConfig c = kv.has("preset") ? preset(kv.get("preset")) : DualMoeConfig{};
    auto geti = [&](const char* key, int& field) { field = static_cast<int>(kv.get_int(key, field)); };
    geti("input_dim", c.input_dim);
    geti("encoder_depth", c.encoder_depth);
    geti("encoder_width", c.encoder_width);
    geti("expert_depth", c.expert_depth);
    geti("expert_width", c.expert_width);
    geti("latent_dim", c.latent_dim);
    geti("router_depth", c.router_depth);
    geti("router_width", c.router_width);
    geti("hazard_expert_depth", c.hazard_expert_depth);
    geti("hazard_expert_width", c.hazard_expert_width);
    geti("num_feature_experts", c.num_feature_experts);
    geti("num_hazard_experts", c.num_hazard_experts);
    geti("max_bin", c.max_bin);
    geti("time_dim", c.time_dim);
    c.alpha = kv.get_double("alpha", c.alpha);
    c.beta = kv.get_double("beta", c.beta);
    c.feature_moe = kv.get_bool("feature_moe", c.feature_moe);
    c.hazard_moe = kv.get_bool("hazard_moe", c.hazard_moe);
    c.hazard_router_input = parse_router_input(kv.get_or("hazard_router_input", to_string(c.hazard_router_input)));
    DualMoeConfig probe = c;
    if (probe.input_dim == 0) probe.input_dim = 1;  // bound to the data later
    probe.validate();
    return c;
}

DualMoeConfig DualMoeConfig::preset(std::string_view dataset) {
    DualMoeConfig c;
    if (dataset == "metabric") {
        c.encoder_depth = 4;
        c.expert_depth = 1;
        c.num_feature_experts = 4;
        c.num_hazard_experts = 4;
    } else if (dataset == "gbsg") {
        c.encoder_depth = 3;
        c.expert_depth = 2;
        c.num_feature_experts = 6;
        c.num_hazard_experts = 3;
    } else {
        throw ConfigError("unknown model preset '" + std::string(dataset) + "' (expected metabric or gbsg)");
    }
    return c;
}

// ---------------------------------------------------------------- layers

namespace {

std::string layer(const std::string& prefix, int i, const char* what) {
    return prefix + "." + std::to_string(i) + "." + what;
}

template <class ParamFn>
Var dense(ParamFn& param, const std::string& prefix, int i, Var x) {
    return matmul(x, param(layer(prefix, i, "weight"))) + param(layer(prefix, i, "bias"));
}

/// First layer over the virtual concatenation [z_i; e_t] for every (i, t),
/// row i*T + t. Splitting the weight rows gives the same product as
/// concatenating first without materialising the (B*T) x (dz+de) input.
template <class ParamFn>
Var pair_dense(ParamFn& param, const std::string& prefix, Var z, Var e) {
    Var w = param(layer(prefix, 0, "weight"));
    Var wz = ad::row_block(w, 0, z.cols());
    Var we = ad::row_block(w, z.cols(), e.cols());
    return ad::pair_sum(matmul(z, wz), matmul(e, we) + param(layer(prefix, 0, "bias")));
}

/// Applies layers 1..n_layers-1 to the pre-activation output of layer 0.
template <class ParamFn>
Var mlp_rest(ParamFn& param, const std::string& prefix, Var h, int n_layers, bool relu_last) {
    for (int i = 1; i < n_layers; ++i) h = dense(param, prefix, i, relu(h));
    return relu_last ? relu(h) : h;
}

template <class ParamFn>
Var mlp(ParamFn& param, const std::string& prefix, Var x, int n_layers, bool relu_last) {
    if (n_layers == 0) return x;
    return mlp_rest(param, prefix, dense(param, prefix, 0, x), n_layers, relu_last);
}

std::string feature_expert(int k) { return "feature_expert." + std::to_string(k); }
std::string hazard_expert(int l) { return "hazard_expert." + std::to_string(l); }

}  // namespace

// ---------------------------------------------------------------- model

DualMoeModel::DualMoeModel(DualMoeConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    init_parameters(seed);
}

DualMoeModel::DualMoeModel(DualMoeConfig config, ad::ParameterStore params) : config_(std::move(config)) {
    config_.validate();
    init_parameters(0);
    if (params.size() != params_.size())
        throw ConfigError("parameter set has " + std::to_string(params.size()) + " tensors, model expects " +
                          std::to_string(params_.size()));
    for (const auto& expected : params_) {
        if (!params.contains(expected.name)) throw ConfigError("parameter set lacks '" + expected.name + "'");
        const auto& got = params.at(expected.name);
        if (got.value.rows() != expected.value.rows() || got.value.cols() != expected.value.cols())
            throw ConfigError("parameter '" + expected.name + "' has the wrong shape");
    }
    params_ = std::move(params);
}

void DualMoeModel::init_parameters(std::uint64_t seed) {
    Rng rng = Rng(seed).split(0x1a17);
    auto add_layer = [&](const std::string& prefix, int i, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        MatrixXd w(fan_in, fan_out);
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
        params_.add(layer(prefix, i, "weight"), std::move(w));
        params_.add(layer(prefix, i, "bias"), MatrixXd::Zero(1, fan_out));
    };
    auto add_mlp = [&](const std::string& prefix, int in, int depth, int width, int out) {
        for (int i = 0; i < depth; ++i) {
            add_layer(prefix, i, in, width);
            in = width;
        }
        add_layer(prefix, depth, in, out);
    };

    const DualMoeConfig& c = config_;
    int in = c.input_dim;
    for (int i = 0; i < c.encoder_depth; ++i) {
        add_layer("encoder", i, in, c.encoder_width);
        in = c.encoder_width;
    }
    const int g_dim = in;
    for (int k = 0; k < c.feature_experts(); ++k) add_mlp(feature_expert(k), g_dim, c.expert_depth, c.expert_width, c.latent_dim);
    if (c.feature_moe) add_mlp("feature_router", g_dim, c.router_depth, c.router_width, c.num_feature_experts);

    MatrixXd emb(c.bins(), c.time_dim);
    for (Index r = 0; r < emb.rows(); ++r)
        for (Index j = 0; j < emb.cols(); ++j) emb(r, j) = 0.1 * rng.normal();
    params_.add("time_embedding", std::move(emb));

    for (int l = 0; l < c.hazard_experts(); ++l)
        add_mlp(hazard_expert(l), c.latent_dim + c.time_dim, c.hazard_expert_depth, c.hazard_expert_width, 1);
    if (c.hazard_moe) {
        const int router_in = c.hazard_router_input == RouterInput::Both       ? c.latent_dim + c.time_dim
                              : c.hazard_router_input == RouterInput::TimeOnly ? c.time_dim
                                                                               : c.latent_dim;
        add_mlp("hazard_router", router_in, c.router_depth, c.router_width, c.num_hazard_experts);
    }
}

template <class ParamFn>
void DualMoeModel::encode_graph(Graph& g, ParamFn&& param, Var x, Var& z, Var& pi_feat) const {
    const DualMoeConfig& c = config_;
    if (x.cols() != c.input_dim)
        throw ConfigError("input has " + std::to_string(x.cols()) + " features, model expects " +
                          std::to_string(c.input_dim));
    Var h = mlp(param, "encoder", x, c.encoder_depth, true);
    const int n_experts = c.expert_depth + 1;
    if (!c.feature_moe) {
        z = mlp(param, feature_expert(0), h, n_experts, false);
        pi_feat = g.constant(MatrixXd::Ones(x.rows(), 1));
        return;
    }
    pi_feat = ad::softmax_rows(mlp(param, "feature_router", h, c.router_depth + 1, false));
    for (int k = 0; k < c.num_feature_experts; ++k) {
        Var weighted = ad::col_block(pi_feat, k, 1) * mlp(param, feature_expert(k), h, n_experts, false);
        z = k == 0 ? weighted : z + weighted;
    }
}

template <class ParamFn>
void DualMoeModel::hazard_graph(Graph& g, ParamFn&& param, Var z, std::size_t batch, Var& hazard,
                                Var& pi_haz) const {
    const DualMoeConfig& c = config_;
    const auto b = static_cast<Index>(batch);
    const Index t = c.bins();
    Var e = param("time_embedding");
    const int n_layers = c.hazard_expert_depth + 1;

    std::vector<Var> logits;
    for (int l = 0; l < c.hazard_experts(); ++l) {
        const std::string p = hazard_expert(l);
        logits.push_back(mlp_rest(param, p, pair_dense(param, p, z, e), n_layers, false));
    }

    Var mixed;
    if (!c.hazard_moe) {
        pi_haz = g.constant(MatrixXd::Ones(b * t, 1));
        mixed = logits.front();
    } else {
        const int r_layers = c.router_depth + 1;
        switch (c.hazard_router_input) {
            case RouterInput::Both:
                pi_haz = ad::softmax_rows(mlp_rest(param, "hazard_router", pair_dense(param, "hazard_router", z, e),
                                                   r_layers, false));
                break;
            case RouterInput::FeaturesOnly:
                pi_haz = ad::repeat_rows(ad::softmax_rows(mlp(param, "hazard_router", z, r_layers, false)), t);
                break;
            case RouterInput::TimeOnly:
                pi_haz = ad::tile_rows(ad::softmax_rows(mlp(param, "hazard_router", e, r_layers, false)), b);
                break;
        }
        mixed = ad::sum_rows(pi_haz * ad::concat_cols(logits));
    }
    hazard = ad::sigmoid(ad::unflatten(mixed, b, t));
}

template <class ParamFn>
ForwardResult DualMoeModel::run(Graph& g, ParamFn&& param, Var x) const {
    ForwardResult out;
    encode_graph(g, param, x, out.z, out.pi_feat);
    hazard_graph(g, param, out.z, static_cast<std::size_t>(x.rows()), out.hazard, out.pi_haz);
    return out;
}

ForwardResult DualMoeModel::forward(Graph& g, const MatrixXd& x) {
    if (x.rows() == 0) throw UsageError("forward on an empty batch");
    return run(g, [&](const std::string& name) { return g.parameter(params_.at(name)); }, g.constant(x));
}

ForwardResult DualMoeModel::forward_inference(Graph& g, const MatrixXd& x) const {
    if (x.rows() == 0) throw UsageError("forward on an empty batch");
    return run(g, [&](const std::string& name) { return g.constant(params_.at(name).value); }, g.constant(x));
}

EncodedRepresentation DualMoeModel::encode(std::span<const double> x) const {
    Graph g;
    MatrixXd row(1, static_cast<Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Index>(j)) = x[j];
    Var z, pi;
    encode_graph(g, [&](const std::string& name) { return g.constant(params_.at(name).value); }, g.constant(row), z,
                 pi);
    EncodedRepresentation enc;
    enc.z.assign(z.value().data(), z.value().data() + z.value().size());
    enc.pi_feat.assign(pi.value().data(), pi.value().data() + pi.value().size());
    return enc;
}

std::pair<HazardCurve, RoutingTrace> DualMoeModel::hazard_forward(const EncodedRepresentation& enc) const {
    if (static_cast<int>(enc.z.size()) != config_.latent_dim)
        throw ConfigError("encoded representation has the wrong size for this model");
    Graph g;
    MatrixXd z(1, static_cast<Index>(enc.z.size()));
    for (std::size_t j = 0; j < enc.z.size(); ++j) z(0, static_cast<Index>(j)) = enc.z[j];
    Var hazard, pi_haz;
    hazard_graph(g, [&](const std::string& name) { return g.constant(params_.at(name).value); }, g.constant(z), 1,
                 hazard, pi_haz);
    const MatrixXd& h = hazard.value();
    std::vector<double> hv(h.data(), h.data() + h.size());
    RoutingTrace trace{enc.pi_feat, pi_haz.value()};
    return {HazardCurve::from_hazards(hv), std::move(trace)};
}

HazardCurve DualMoeModel::predict_curve(std::span<const double> x) const { return hazard_forward(encode(x)).first; }

BatchPrediction DualMoeModel::batch_forward(const MatrixXd& x) const {
    if (x.rows() == 0) throw UsageError("batch_forward on an empty batch");
    Graph g;
    ForwardResult r = forward_inference(g, x);
    return BatchPrediction{r.hazard.value(), r.pi_feat.value(), r.pi_haz.value()};
}

HazardCurve BatchPrediction::curve(std::size_t i) const {
    std::vector<double> h(static_cast<std::size_t>(hazard.cols()));
    for (Index t = 0; t < hazard.cols(); ++t) h[static_cast<std::size_t>(t)] = hazard(static_cast<Index>(i), t);
    return HazardCurve::from_hazards(h);
}

RoutingTrace BatchPrediction::trace(std::size_t i) const {
    const Index t = hazard.cols();
    const auto row = static_cast<Index>(i);
    RoutingTrace tr;
    tr.pi_feat.resize(static_cast<std::size_t>(pi_feat.cols()));
    for (Index k = 0; k < pi_feat.cols(); ++k) tr.pi_feat[static_cast<std::size_t>(k)] = pi_feat(row, k);
    tr.pi_haz = pi_haz.middleRows(row * t, t);
    return tr;
}

}  // namespace moesurv
