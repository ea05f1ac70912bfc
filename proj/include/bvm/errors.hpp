#pragma once

#include <stdexcept>
#include <string>

namespace bvm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct DegreesOfFreedomTooSmall : Error {
    using Error::Error;
};
struct BadInit : Error {
    using Error::Error;
};
struct NonFiniteLikelihood : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct PerturbationTooLarge : Error {
    using Error::Error;
};
struct ZeroEigengap : Error {
    using Error::Error;
};
struct OrderTooHigh : Error {
    using Error::Error;
};
struct SingularSample : Error {
    using Error::Error;
};
struct CovarianceMismatch : Error {
    using Error::Error;
};
struct NonPositiveVariance : Error {
    using Error::Error;
};
struct EmptySamples : Error {
    using Error::Error;
};
struct EmptyData : Error {
    using Error::Error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
// Internal dual-route consistency check failed (e.g. closed-form variance vs
// its generic trace form). Indicates a bug or a severely ill-conditioned input.
struct NumericalError : Error {
    using Error::Error;
};

// Config validation failure; `field` names the offending entry ("alpha", "truth", "y.n", ...).
struct ConfigParse : Error {
    std::string field;
    ConfigParse(std::string field_, const std::string& what_)
        : Error("config field '" + field_ + "': " + what_), field(std::move(field_)) {}
};

}  // namespace bvm
