#pragma once

#include <stdexcept>
#include <string>

namespace mfegan {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shapes don't line up for the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

// An argument value is outside its allowed domain (stride <= 0, SP not a
// multiple of 4, dropout p out of [0,1), ...).
struct ParameterError : Error {
  using Error::Error;
};

// API misuse: backward on a non-scalar, optimizer step with missing grads,
// selection over NaN fitness, and similar programming-contract violations.
struct ContractError : Error {
  using Error::Error;
};

// A forward/backward pass produced NaN or Inf, or training diverged.
struct NumericError : Error {
  using Error::Error;
};

// A file is not in the expected on-disk format (bad magic, truncated payload,
// malformed config).  Messages carry the file name and, where known, offset.
struct FormatError : Error {
  using Error::Error;
};

// The data itself violates an invariant (empty class, non-contiguous label
// ids, degenerate batch-norm batch, mismatched artifacts).
struct DataError : Error {
  using Error::Error;
};

}  // namespace mfegan
