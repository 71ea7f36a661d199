#include "mfegan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mfegan {

GradCheckResult grad_check(const std::function<Tensor()>& f, Tensor x,
                           double h, double denom_floor) {
  if (!x.defined() || !x.is_leaf() || !x.requires_grad()) {
    throw ContractError("grad_check: x must be a gradient-tracked leaf");
  }
  if (!(h > 0.0)) throw ParameterError("grad_check: h must be > 0");
  if (!(denom_floor > 0.0)) {
    throw ParameterError("grad_check: denom_floor must be > 0");
  }

  GradCheckResult result;

  // Determinism probe: the checker is only meaningful for pure functions.
  double probe1, probe2;
  {
    NoGradScope ng;
    probe1 = f().item_f64();
    probe2 = f().item_f64();
  }
  result.deterministic = (probe1 == probe2);

  // Analytic gradient from one taped evaluation.
  x.zero_grad();
  std::vector<float> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
    std::span<float> g = x.grad();
    analytic.assign(g.begin(), g.end());
  }
  x.zero_grad();

  // Central differences, one element at a time, forward passes only.
  float* data = x.data();
  NoGradScope ng;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float saved = data[i];
    data[i] = static_cast<float>(saved + h);
    const double fp = f().item_f64();
    data[i] = static_cast<float>(saved - h);
    const double fm = f().item_f64();
    data[i] = saved;
    // Use the step actually realized after float32 rounding of the endpoints.
    const double realized =
        static_cast<double>(static_cast<float>(saved + h)) -
        static_cast<double>(static_cast<float>(saved - h));
    const double numeric = (fp - fm) / realized;
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), denom_floor});
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric;
    }
  }
  return result;
}

}  // namespace mfegan
