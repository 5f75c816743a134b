#pragma once

#include <stdexcept>
#include <string>

namespace moesurv {

/// Bad shapes, invalid hyperparameters, degenerate inputs the caller controls.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API misuse (non-scalar backward root, empty batch, missing baseline...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Values outside an operation's mathematical domain (log of non-positive, NaN logits).
class NumericDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// CSV/schema problems. Carries the 1-based data row (0 when not row-specific) and column.
class IngestionError : public std::runtime_error {
public:
    IngestionError(const std::string& what, std::size_t row = 0, std::string column = {})
        : std::runtime_error(what), row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// A metric with no comparable pairs (or no events to define horizons).
class UndefinedMetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace moesurv
