#pragma once

// Dual mixture-of-experts discrete-time survival network.
//
//   g        initial encoder MLP
//   f_k      K feature experts over g(x), mixed by a softmax router on g(x):
//              z(x) = sum_k pi_feat_k f_k(g(x))
//   e_t      learned time embedding per bin t = 0..max_bin
//   h_l      L hazard experts, each one network shared across bins and
//            evaluated on [z; e_t], emitting a logit
//   router   softmax over L from [z; e_t], z alone, or e_t alone
//   hazard(t|x) = sigmoid( sum_l pi_haz_{t,l} h_l(z, e_t) )
//
// Disabling a MoE stage keeps a single expert and drops its router; with both
// disabled the network is the plain single-encoder/single-hazard baseline.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moesurv/autodiff.hpp"
#include "moesurv/keyvalue.hpp"
#include "moesurv/survival.hpp"

namespace moesurv {

enum class RouterInput { FeaturesOnly, TimeOnly, Both };
RouterInput parse_router_input(const std::string& s);
std::string to_string(RouterInput r);

struct DualMoeConfig {
    int input_dim = 0;
    int encoder_depth = 4;  ///< hidden layers in g
    int encoder_width = 64;
    int expert_depth = 1;  ///< hidden layers in each feature expert
    int expert_width = 64;
    int latent_dim = 64;  ///< size of z
    int router_depth = 1;  ///< hidden layers in both routers
    int router_width = 64;
    int hazard_expert_depth = 1;
    int hazard_expert_width = 64;
    int num_feature_experts = 4;  ///< K
    int num_hazard_experts = 4;   ///< L
    int max_bin = 19;             ///< T_max; the model emits max_bin + 1 hazards
    int time_dim = 8;
    double alpha = 0.3;  ///< feature load-balance weight
    double beta = 0.5;   ///< hazard load-balance weight
    bool feature_moe = true;
    bool hazard_moe = true;
    RouterInput hazard_router_input = RouterInput::Both;

    /// Throws ConfigError on out-of-range values.
    void validate() const;

    int feature_experts() const { return feature_moe ? num_feature_experts : 1; }
    int hazard_experts() const { return hazard_moe ? num_hazard_experts : 1; }
    int bins() const { return max_bin + 1; }

    KeyValues to_kv() const;
    /// Unspecified keys keep their defaults; unknown keys are rejected.
    static DualMoeConfig from_kv(const KeyValues& kv);

    /// "metabric" (encoder depth 4, K=4, L=4), "gbsg" (encoder depth 3,
    /// expert depth 2, K=6, L=3). Widths 64, d_time 8, alpha 0.3, beta 0.5.
    static DualMoeConfig preset(std::string_view dataset);
};

struct EncodedRepresentation {
    std::vector<double> z;
    std::vector<double> pi_feat;
};

struct RoutingTrace {
    std::vector<double> pi_feat;  ///< K
    Eigen::MatrixXd pi_haz;       ///< (max_bin+1) x L
};

/// Graph outputs of a forward pass over a batch of B rows, T = max_bin + 1.
struct ForwardResult {
    ad::Var hazard;   ///< B x T
    ad::Var pi_feat;  ///< B x K (a constant column of ones when the feature MoE is off)
    ad::Var pi_haz;   ///< (B*T) x L, row i*T + t (ones when the hazard MoE is off)
    ad::Var z;        ///< B x latent_dim
};

/// Plain-matrix outputs for inference.
struct BatchPrediction {
    Eigen::MatrixXd hazard;   ///< B x T
    Eigen::MatrixXd pi_feat;  ///< B x K
    Eigen::MatrixXd pi_haz;   ///< (B*T) x L

    std::size_t size() const { return static_cast<std::size_t>(hazard.rows()); }
    HazardCurve curve(std::size_t i) const;
    RoutingTrace trace(std::size_t i) const;
};

class DualMoeModel {
public:
    /// Fresh parameters: Glorot-uniform weights, zero biases, N(0, 0.1^2) time embeddings.
    DualMoeModel(DualMoeConfig config, std::uint64_t seed);
    /// Adopts existing parameters (e.g. from a checkpoint); checks names and shapes.
    DualMoeModel(DualMoeConfig config, ad::ParameterStore params);

    const DualMoeConfig& config() const { return config_; }
    ad::ParameterStore& params() { return params_; }
    const ad::ParameterStore& params() const { return params_; }

    /// Trainable forward pass: parameter leaves accumulate gradients.
    ForwardResult forward(ad::Graph& g, const Eigen::MatrixXd& x);
    /// Same computation with parameters as constants (no gradient state touched).
    ForwardResult forward_inference(ad::Graph& g, const Eigen::MatrixXd& x) const;

    EncodedRepresentation encode(std::span<const double> x) const;
    std::pair<HazardCurve, RoutingTrace> hazard_forward(const EncodedRepresentation& enc) const;
    HazardCurve predict_curve(std::span<const double> x) const;
    /// Throws UsageError on an empty batch.
    BatchPrediction batch_forward(const Eigen::MatrixXd& x) const;

private:
    template <class ParamFn>
    ForwardResult run(ad::Graph& g, ParamFn&& param, ad::Var x) const;
    template <class ParamFn>
    void encode_graph(ad::Graph& g, ParamFn&& param, ad::Var x, ad::Var& z, ad::Var& pi_feat) const;
    template <class ParamFn>
    void hazard_graph(ad::Graph& g, ParamFn&& param, ad::Var z, std::size_t batch, ad::Var& hazard,
                      ad::Var& pi_haz) const;

    void init_parameters(std::uint64_t seed);

    DualMoeConfig config_;
    ad::ParameterStore params_;
};

}  // namespace moesurv
