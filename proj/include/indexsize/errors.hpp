#pragma once

#include <stdexcept>
#include <string>

namespace indexsize {

/// Invalid configuration or input. `field()` names the offending field.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// An estimator was asked for a value that is mathematically undefined
/// (zero recapture, zero overlap, zero variance, ...).
class UndefinedEstimateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Transport-style failure reported by a search backend.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A tabular input does not match its documented header.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A run configuration is missing something a selected method needs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace indexsize
