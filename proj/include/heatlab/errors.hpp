#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heatlab {

/// Base class for everything heatlab throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed config, invalid problem definition, misuse of an API
/// precondition that a caller controls. Maps to CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// A numerical procedure failed (non-convergence, left the chart, singular
/// matrix, budget exhausted, ...). Maps to CLI exit code 3.
struct NumericalError : Error {
    using Error::Error;
};

struct OutOfChart : NumericalError {
    using NumericalError::NumericalError;
};

struct LeftChart : NumericalError {
    using NumericalError::NumericalError;
};

struct SingularMetric : NumericalError {
    using NumericalError::NumericalError;
};

struct NoConvergence : NumericalError {
    using NumericalError::NumericalError;
};

struct NegativeDeterminant : NumericalError {
    using NumericalError::NumericalError;
};

struct CostBudgetExceeded : NumericalError {
    using NumericalError::NumericalError;
};

struct QuadratureError : NumericalError {
    using NumericalError::NumericalError;
};

struct OddDimension : ConfigError {
    using ConfigError::ConfigError;
};

struct SupremumViolated : ConfigError {
    using ConfigError::ConfigError;
};

/// Expression-parser failure with the offending position in the source string.
struct ParseError : ConfigError {
    ParseError(const std::string& msg, std::size_t pos, std::string expect)
        : ConfigError(msg), position(pos), expected(std::move(expect)) {}
    std::size_t position;
    std::string expected;
};

struct ArityError : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace heatlab
