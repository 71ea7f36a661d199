#include <cmath>

#include "doctest.h"
#include "mfegan/ops.hpp"
#include "mfegan/optim.hpp"

using namespace mfegan;
namespace op = mfegan::ops;

TEST_CASE("single adam step matches the hand-computed update") {
  Tensor p = Tensor::from({1}, {1.0f}, true);
  p.grad()[0] = 0.5f;
  Adam opt({p}, AdamConfig{});  // lr 2e-4, betas 0.5/0.999, eps 1e-8

  opt.step();
  // m = 0.5*0.5 = 0.25, mhat = 0.25/(1-0.5) = 0.5
  // v = 0.001*0.25 = 2.5e-4, vhat = 2.5e-4/0.001 = 0.25
  // w = 1 - 2e-4 * 0.5/(0.5 + 1e-8) ~= 1 - 2e-4
  CHECK(p.data()[0] == doctest::Approx(1.0 - 2e-4).epsilon(1e-6));
  CHECK(opt.step_count() == 1);
  // gradients are consumed
  CHECK(p.grad()[0] == 0.0f);
}

TEST_CASE("missing gradient is a contract error") {
  Tensor p = Tensor::from({2}, {1.0f, 2.0f}, true);
  Adam opt({p}, AdamConfig{});
  CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("zero gradient leaves the parameter bit-identical") {
  Tensor p = Tensor::from({2}, {0.75f, -1.25f}, true);
  p.grad();  // allocate zeros
  Adam opt({p}, AdamConfig{});
  opt.step();
  CHECK(p.data()[0] == 0.75f);
  CHECK(p.data()[1] == -1.25f);
}

TEST_CASE("cloned optimizer state continues identically") {
  Tensor p = Tensor::from({3}, {1.0f, -2.0f, 0.5f}, true);
  Adam opt({p}, AdamConfig{});
  for (int s = 0; s < 3; ++s) {
    for (int i = 0; i < 3; ++i) p.grad()[i] = 0.1f * (i + 1) * (s + 1);
    opt.step();
  }

  // Clone the parameter and the optimizer state, then feed both the same
  // gradient; the updated values must match exactly.
  Tensor q = p.clone();
  q.set_requires_grad(true);
  Adam opt2 = opt.clone_for({q});
  for (int i = 0; i < 3; ++i) {
    p.grad()[i] = 0.2f;
    q.grad()[i] = 0.2f;
  }
  opt.step();
  opt2.step();
  for (int i = 0; i < 3; ++i) CHECK(p.data()[i] == q.data()[i]);
  CHECK(opt2.step_count() == opt.step_count());

  CHECK_THROWS_AS(opt.clone_for({Tensor::zeros({2}, true)}), ContractError);
}

TEST_CASE("adam drives a convex problem toward its minimum") {
  Tensor p = Tensor::from({2}, {3.0f, -2.0f}, true);
  Adam opt({p}, AdamConfig{.lr = 0.05f});
  for (int s = 0; s < 400; ++s) {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = op::sum_all(op::square(p));
    tape.backward(loss);
    opt.step();
  }
  CHECK(std::abs(p.data()[0]) < 0.05f);
  CHECK(std::abs(p.data()[1]) < 0.05f);
}

TEST_CASE("config validation") {
  Tensor p = Tensor::zeros({1}, true);
  CHECK_THROWS_AS(Adam({p}, AdamConfig{.lr = 0.0f}), ParameterError);
  CHECK_THROWS_AS(Adam({p}, AdamConfig{.beta1 = 1.0f}), ParameterError);
  CHECK_THROWS_AS(Adam({Tensor::zeros({1}, false)}, AdamConfig{}), ContractError);
}
