#include "moesurv/parameters.hpp"

#include <cmath>
#include <fstream>

#include "moesurv/binio.hpp"
#include "moesurv/error.hpp"

namespace moesurv::ad {

namespace {
constexpr char kCheckpointMagic[9] = "MOESCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

Parameter& ParameterStore::add(std::string name, Matrix init) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
    Parameter p;
    p.name = name;
    p.grad = Matrix::Zero(init.rows(), init.cols());
    p.first_moment = Matrix::Zero(init.rows(), init.cols());
    p.second_moment = Matrix::Zero(init.rows(), init.cols());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    index_.emplace(std::move(name), params_.size() - 1);
    return params_.back();
}

Parameter& ParameterStore::at(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + std::string(name));
    return params_[it->second];
}

const Parameter& ParameterStore::at(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + std::string(name));
    return params_[it->second];
}

bool ParameterStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.grad.setZero();
}

std::vector<Matrix> ParameterStore::snapshot_values() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
}

void ParameterStore::restore_values(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw UsageError("snapshot does not match parameter store");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
}

void adam_step(ParameterStore& store, const AdamOptions& opt) {
    const std::uint64_t t = store.step_count() + 1;
    store.set_step_count(t);
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (auto& p : store) {
        p.first_moment = opt.beta1 * p.first_moment + (1.0 - opt.beta1) * p.grad;
        p.second_moment = opt.beta2 * p.second_moment + (1.0 - opt.beta2) * p.grad.cwiseProduct(p.grad);
        p.value.array() -= opt.lr * (p.first_moment.array() / bc1) /
                           ((p.second_moment.array() / bc2).sqrt() + opt.eps);
        p.grad.setZero();
    }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& config_text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
    binio::Writer w(os);
    w.magic(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.str(config_text);
    w.u64(store.step_count());
    w.u64(store.size());
    for (const auto& p : store) {
        w.str(p.name);
        w.matrix(p.value);
        w.matrix(p.first_moment);
        w.matrix(p.second_moment);
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path.string());
    binio::Reader r(is);
    r.expect_magic(kCheckpointMagic);
    if (const auto v = r.u32(); v != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(v));
    Checkpoint ck;
    ck.config_text = r.str();
    ck.store.set_step_count(r.u64());
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = r.str();
        Parameter& p = ck.store.add(std::move(name), r.matrix());
        p.first_moment = r.matrix();
        p.second_moment = r.matrix();
    }
    return ck;
}

}  // namespace moesurv::ad
