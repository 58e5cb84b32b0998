#pragma once
#include <stdexcept>
#include <string>

namespace tcar {

// Base class for all domain errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration / input errors (CLI maps these to exit code 2).
struct ParseError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};

// Numerical / model-domain errors (CLI maps these to exit code 3).
struct InfeasibleEquilibrium : Error {
    using Error::Error;
};
struct DegenerateRegime : Error {
    using Error::Error;
};
struct NearDefectiveEigenbasis : Error {
    using Error::Error;
};
struct SingularKappa4 : Error {
    using Error::Error;
};
struct SingularInletSystem : Error {
    using Error::Error;
};
struct OrderingViolation : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    NoConvergence(const std::string& msg, int iterations, double final_change)
        : Error(msg), iterations(iterations), final_change(final_change) {}
    int iterations;
    double final_change;
};
struct CFLViolation : Error {
    using Error::Error;
};
struct NonFiniteState : Error {
    using Error::Error;
};
struct GridMismatch : Error {
    using Error::Error;
};

}  // namespace tcar
