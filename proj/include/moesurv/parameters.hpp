#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace moesurv::ad {

using Matrix = Eigen::MatrixXd;

/// A trainable tensor plus its Adam moments. `grad` accumulates across
/// backward passes until the optimizer consumes it.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;
};

/// Named parameters with stable addresses (graph leaves hold pointers into it).
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = default;
    ParameterStore& operator=(const ParameterStore&) = default;
    ParameterStore(ParameterStore&&) noexcept = default;
    ParameterStore& operator=(ParameterStore&&) noexcept = default;

    /// Throws ConfigError if `name` already exists.
    Parameter& add(std::string name, Matrix init);

    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    std::uint64_t step_count() const { return steps_; }
    void set_step_count(std::uint64_t n) { steps_ = n; }

    /// Copies values only (used for early-stopping snapshots).
    std::vector<Matrix> snapshot_values() const;
    void restore_values(const std::vector<Matrix>& values);

private:
    std::deque<Parameter> params_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::uint64_t steps_ = 0;
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter, then clears grads.
void adam_step(ParameterStore& store, const AdamOptions& opt);

/// Checkpoint container: magic, version, config text, step count, then each
/// tensor as (name, value, first moment, second moment) with row-major
/// little-endian float64 payloads.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& config_text);

struct Checkpoint {
    ParameterStore store;
    std::string config_text;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace moesurv::ad
