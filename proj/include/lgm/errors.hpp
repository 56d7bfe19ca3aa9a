#pragma once

#include <stdexcept>
#include <string>

namespace lgm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

// Non-positive pivot during Cholesky; carries the offending row.
struct FactorizationError : Error {
  FactorizationError(const std::string& msg, int pivot_index)
      : Error(msg), pivot(pivot_index) {}
  int pivot;
};

struct ConstraintError : Error {
  using Error::Error;
};

struct FitError : Error {
  using Error::Error;
};

struct SamplerError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace lgm
