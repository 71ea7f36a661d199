#include "mfegan/optim.hpp"

#include <cmath>

namespace mfegan {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0.0f)) throw ParameterError("adam: lr must be > 0");
  if (!(cfg_.beta1 >= 0.0f && cfg_.beta1 < 1.0f) ||
      !(cfg_.beta2 >= 0.0f && cfg_.beta2 < 1.0f)) {
    throw ParameterError("adam: betas must be in [0,1)");
  }
  if (!(cfg_.eps > 0.0f)) throw ParameterError("adam: eps must be > 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.defined() || !p.is_leaf() || !p.requires_grad()) {
      throw ContractError("adam: parameters must be gradient-tracked leaves");
    }
    m_.emplace_back(p.numel(), 0.0f);
    v_.emplace_back(p.numel(), 0.0f);
  }
}

void Adam::step() {
  for (const Tensor& p : params_) {
    if (!p.has_grad()) {
      throw ContractError("adam: step() with a parameter of shape " +
                          shape_str(p.shape()) + " that has no gradient");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), t_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    float* w = p.data();
    std::span<float> g = p.grad();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g[j] * g[j];
      const float mhat = static_cast<float>(m[j] / bc1);
      const float vhat = static_cast<float>(v[j] / bc2);
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
  }
}

Adam Adam::clone_for(std::vector<Tensor> params) const {
  if (params.size() != params_.size()) {
    throw ContractError("adam: clone_for() parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != params_[i].shape()) {
      throw ContractError("adam: clone_for() shape mismatch at parameter " +
                          std::to_string(i));
    }
  }
  Adam copy;
  copy.params_ = std::move(params);
  copy.m_ = m_;
  copy.v_ = v_;
  copy.t_ = t_;
  copy.cfg_ = cfg_;
  return copy;
}

}  // namespace mfegan
