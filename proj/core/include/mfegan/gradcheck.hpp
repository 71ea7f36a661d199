#pragma once

#include <functional>

#include "mfegan/tensor.hpp"

namespace mfegan {

struct GradCheckResult {
  double max_rel_error = 0.0;  // max over elements of the relative mismatch
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool deterministic = true;  // two evaluations of f agreed bit-for-bit
};

// Compares the tape gradient of scalar-valued f with central finite
// differences over every element of x.
//
//   f  : evaluates the scalar using the CURRENT contents of x (the closure
//        must reference the same tensor handle that is passed as x)
//   x  : gradient-tracked leaf being perturbed
//   h  : central-difference step
//
// The relative error of element i is
//   |a_i - n_i| / max(|a_i|, |n_i|, denom_floor)
// with denom_floor defaulting to 1e-8.  Deep float32 compositions produce
// elements whose true gradient is far below the roundoff of the difference
// quotient; raising denom_floor makes those elements count as an absolute
// comparison instead of a meaningless relative one.
//
// f is evaluated twice up front; if the two values differ, the function is
// nondeterministic (e.g. live dropout) and `deterministic` is set false --
// callers should treat the comparison as meaningless in that case.
// Numeric differencing uses the float64 value carried by reduction outputs.
GradCheckResult grad_check(const std::function<Tensor()>& f, Tensor x,
                           double h, double denom_floor = 1e-8);

}  // namespace mfegan
