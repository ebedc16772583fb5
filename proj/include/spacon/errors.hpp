#pragma once

#include <stdexcept>
#include <string>

namespace spacon {

/// Invalid input: shape mismatches, broken invariants, bad configuration.
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure: eigensolver non-convergence, singular factorizations.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spacon
