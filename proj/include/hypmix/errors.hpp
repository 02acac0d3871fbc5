#pragma once

#include <stdexcept>
#include <string>

namespace hypmix {

// Argument outside the domain of a map or a density.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A value left the representable range (for instance f0 evaluated too close to 1).
struct OverflowError : std::overflow_error {
    using std::overflow_error::overflow_error;
};

// The point sits exactly on a partition endpoint, so no branch can be chosen.
struct BoundaryError : std::runtime_error {
    explicit BoundaryError(const std::string& what, double at = 0.0)
        : std::runtime_error(what), point(at) {}
    double point;
};

// The orbit reached the singular line x = 1.
struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two independent evaluations of the same quantity disagree beyond tolerance.
struct MismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Some orbit point hit a partition boundary before the truncation order.
struct UnsuitablePointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid user configuration (bad key, bad value, out-of-range parameter).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A rejection loop or a sample budget was exhausted.
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Too few informative points for a fit.
struct InsufficientSignalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File could not be written or read.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hypmix
