#pragma once

#include <stdexcept>
#include <string>

namespace collapse {

// Shape / size violations (non-square input to an eigensolver, mismatched
// products, layout errors).
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Iterative procedure failed to converge, or a bracketing assumption broke.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input on which the requested quantity is undefined
// (rank-deficient QR input, zero classifier in NC2, ...).
struct DegenerateInputError : std::invalid_argument {
  explicit DegenerateInputError(const std::string& what) : std::invalid_argument(what) {}
};

// Operation not defined for the requested loss family.
struct UnsupportedLossError : std::invalid_argument {
  explicit UnsupportedLossError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace collapse
