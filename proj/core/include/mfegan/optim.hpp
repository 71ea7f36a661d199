#pragma once

#include <cstdint>
#include <vector>

#include "mfegan/tensor.hpp"

namespace mfegan {

struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with bias correction.  step() consumes the accumulated gradients of
// every registered parameter (ContractError if any is missing) and zeroes
// them afterwards, so each step sees exactly one backward pass unless the
// caller deliberately accumulates.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();

  // Same moment estimates and step count, rebound to `params` (which must
  // mirror the registered parameters one-to-one in shape).  Used when a
  // cloned model must continue from its parent's optimizer state.
  Adam clone_for(std::vector<Tensor> params) const;

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t t_ = 0;
  AdamConfig cfg_;
};

}  // namespace mfegan
