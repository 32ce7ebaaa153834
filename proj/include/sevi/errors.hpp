#pragma once

#include <stdexcept>
#include <string>

namespace sevi {

// input/data problems: bad CSV, inconsistent model spec, unusable arguments
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// design matrix does not identify the requested coefficients
struct IdentificationError : ValidationError {
  using ValidationError::ValidationError;
};

// problem size beyond what the enumeration machinery supports
struct CapacityError : ValidationError {
  using ValidationError::ValidationError;
};

// optimizer exhausted its iteration budget
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// overflow, singular matrices, failed inversions and the like
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sevi
