#pragma once

#include <stdexcept>
#include <string>

namespace usq {

// Precondition or shape violations raised by the library. The CLI maps
// ConfigError to exit code 1 and NumericalError to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDimension : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct NotHermitian : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

// Integrator step violates the carrier-resolution bound.
struct StepTooLarge : Error {
    using Error::Error;
};

// NaN, positivity loss, non-real variances, or a failed search.
struct NumericalError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace usq
