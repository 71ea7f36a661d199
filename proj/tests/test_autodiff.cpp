#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "mfegan/gradcheck.hpp"
#include "mfegan/ops.hpp"
#include "mfegan/rng.hpp"
#include "mfegan/tensor.hpp"

using namespace mfegan;
namespace op = mfegan::ops;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, float lo, float hi,
                     bool requires_grad = false) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Runs the checker and asserts determinism; returns the worst relative error.
double checked(const std::function<Tensor()>& f, Tensor x, double h,
               double denom_floor = 1e-8) {
  GradCheckResult r = grad_check(f, x, h, denom_floor);
  INFO("worst element ", r.worst_index, ": analytic ", r.analytic_at_worst,
       " numeric ", r.numeric_at_worst);
  CHECK(r.deterministic);
  return r.max_rel_error;
}

}  // namespace

TEST_CASE("sigmoid-sum matches closed-form gradients") {
  const float ln3 = std::log(3.0f);
  Tensor x = Tensor::from({2}, {0.0f, ln3}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = op::sum_all(op::sigmoid(x));
  CHECK(y.item() == doctest::Approx(1.25).epsilon(1e-6));
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(x.grad()[1] == doctest::Approx(0.1875).epsilon(1e-5));

  // And the finite-difference route agrees.
  x.zero_grad();
  double err = checked([&] { return op::sum_all(op::sigmoid(x)); }, x, 1e-3);
  CHECK(err < 1e-3);
}

TEST_CASE("two backward passes double leaf gradients") {
  Tensor x = Tensor::from({3}, {1.0f, -2.0f, 0.5f}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = op::sum_all(op::square(x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0f));
  CHECK(x.grad()[1] == doctest::Approx(-4.0f));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0f));
  CHECK(x.grad()[1] == doctest::Approx(-8.0f));
}

TEST_CASE("backward contracts") {
  Tensor x = Tensor::from({2}, {1.0f, 2.0f}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = op::square(x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);  // non-scalar

  Tensor stray = Tensor::from({1}, {1.0f}, true);
  CHECK_THROWS_AS(tape.backward(stray), ContractError);  // not on tape
}

TEST_CASE("no-grad evaluation records nothing") {
  Tensor x = Tensor::from({2}, {1.0f, 2.0f}, true);
  Tape tape;
  TapeScope scope(tape);
  {
    NoGradScope ng;
    Tensor y = op::sum_all(op::square(x));
    CHECK(y.is_leaf());
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(tape.size() == 0);

  // Untracked inputs also record nothing.
  Tensor plain = Tensor::from({2}, {1.0f, 2.0f});
  Tensor y2 = op::square(plain);
  CHECK(tape.size() == 0);
  CHECK(y2.is_leaf());
}

TEST_CASE("intermediates do not retain gradients") {
  Tensor x = Tensor::from({2}, {1.0f, 2.0f}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor mid = op::square(x);
  Tensor loss = op::sum_all(mid);
  tape.backward(loss);
  CHECK_FALSE(mid.has_grad());
  CHECK(x.has_grad());
}

TEST_CASE("mul with a repeated input accumulates both branches") {
  Tensor x = Tensor::from({2}, {3.0f, -1.5f}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = op::sum_all(op::mul(x, x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0f));
  CHECK(x.grad()[1] == doctest::Approx(-3.0f));
}

TEST_CASE("reductions carry float64 accumulation") {
  std::vector<float> v(10000, 0.1f);
  Tensor x = Tensor::from({10000}, std::move(v));
  Tensor s = op::sum_all(x);
  const double expected = 10000.0 * static_cast<double>(0.1f);
  CHECK(s.item_f64() == doctest::Approx(expected).epsilon(1e-12));
  Tensor m = op::mean_all(x);
  CHECK(m.item_f64() == doctest::Approx(expected / 10000.0).epsilon(1e-12));
}

TEST_CASE("conv2d hand example") {
  // 3x3 input 1..9 against a [[1,0],[0,-1]] kernel: every window evaluates
  // top-left minus bottom-right = -4.
  Tensor x = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k = Tensor::from({1, 1, 2, 2}, {1, 0, 0, -1});
  Tensor y = op::conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (float v : y.values()) CHECK(v == doctest::Approx(-4.0f));
}

TEST_CASE("conv2d and deconv2d shapes") {
  Rng rng(1);
  Tensor x = random_tensor({2, 3, 20, 20}, rng, -1, 1);
  Tensor k = random_tensor({128, 3, 4, 4}, rng, -0.1f, 0.1f);
  CHECK(op::conv2d(x, k, 2, 1).shape() == Shape{2, 128, 10, 10});

  Tensor z = random_tensor({2, 512, 1, 1}, rng, -1, 1);
  Tensor dk = random_tensor({512, 256, 5, 5}, rng, -0.1f, 0.1f);
  CHECK(op::deconv2d(z, dk, 1, 0).shape() == Shape{2, 256, 5, 5});
  Tensor up = random_tensor({2, 256, 5, 5}, rng, -1, 1);
  Tensor dk2 = random_tensor({256, 128, 4, 4}, rng, -0.1f, 0.1f);
  CHECK(op::deconv2d(up, dk2, 2, 1).shape() == Shape{2, 128, 10, 10});

  CHECK_THROWS_AS(op::conv2d(x, random_tensor({8, 4, 3, 3}, rng, -1, 1), 1, 0),
                  DimensionError);
  CHECK_THROWS_AS(op::conv2d(x, k, 0, 1), ParameterError);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  // <conv(x,k), u> must equal <x, deconv(u,k)> when the geometry divides
  // exactly; the same kernel buffer serves both directions.
  Rng rng(2);
  Tensor x = random_tensor({2, 3, 7, 7}, rng, -1, 1);
  Tensor k = random_tensor({4, 3, 3, 3}, rng, -0.5f, 0.5f);
  Tensor y = op::conv2d(x, k, 2, 1);
  CHECK(y.shape() == Shape{2, 4, 4, 4});
  Tensor u = random_tensor({2, 4, 4, 4}, rng, -1, 1);
  Tensor back = op::deconv2d(u, k, 2, 1);
  CHECK(back.shape() == x.shape());

  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    lhs += static_cast<double>(y.data()[i]) * u.data()[i];
  }
  for (std::size_t i = 0; i < x.numel(); ++i) {
    rhs += static_cast<double>(x.data()[i]) * back.data()[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("conv2d gradients agree with finite differences") {
  Rng rng(3);
  Tensor x = random_tensor({2, 2, 5, 5}, rng, -1, 1, true);
  Tensor k = random_tensor({3, 2, 3, 3}, rng, -0.5f, 0.5f, true);
  auto f = [&] { return op::sum_all(op::sigmoid(op::conv2d(x, k, 2, 1))); };
  CHECK(checked(f, x, 1e-2) < 5e-3);
  CHECK(checked(f, k, 1e-2) < 5e-3);
}

TEST_CASE("deconv2d gradients agree with finite differences") {
  Rng rng(4);
  Tensor x = random_tensor({2, 3, 3, 3}, rng, -1, 1, true);
  Tensor k = random_tensor({3, 2, 4, 4}, rng, -0.5f, 0.5f, true);
  auto f = [&] { return op::sum_all(op::sigmoid(op::deconv2d(x, k, 2, 1))); };
  CHECK(checked(f, x, 1e-2) < 1e-2);
  CHECK(checked(f, k, 1e-2) < 1e-2);
}

TEST_CASE("linear gradients and bias broadcast") {
  Rng rng(5);
  Tensor x = random_tensor({3, 4}, rng, -1, 1, true);
  Tensor w = random_tensor({4, 2}, rng, -0.5f, 0.5f, true);
  Tensor b = random_tensor({2}, rng, -0.5f, 0.5f, true);
  auto f = [&] { return op::mean_all(op::sigmoid(op::linear(x, w, b))); };
  CHECK(checked(f, x, 1e-2) < 5e-3);
  CHECK(checked(f, w, 1e-2) < 5e-3);
  CHECK(checked(f, b, 1e-2) < 5e-3);
}

TEST_CASE("batchnorm2d normalizes and tracks running statistics") {
  Tensor x = Tensor::from({2, 1, 1, 1}, {1.0f, 3.0f});
  Tensor gamma = Tensor::from({1}, {2.0f});
  Tensor beta = Tensor::from({1}, {0.5f});
  std::vector<float> rm{0.0f}, rv{1.0f};
  Tensor y = op::batchnorm2d(x, gamma, beta, rm, rv, true, true);
  // batch mean 2, biased var 1: xhat = {-1, +1} (up to eps), y = 2*xhat + 0.5
  CHECK(y.data()[0] == doctest::Approx(-1.5f).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(2.5f).epsilon(1e-4));
  // running stats fold in with momentum 0.1, variance unbiased (n/(n-1) = 2)
  CHECK(rm[0] == doctest::Approx(0.2f).epsilon(1e-6));
  CHECK(rv[0] == doctest::Approx(1.1f).epsilon(1e-6));

  // eval mode uses the running statistics, not the batch
  Tensor ye = op::batchnorm2d(x, gamma, beta, rm, rv, false, false);
  const float iv = 1.0f / std::sqrt(1.1f + 1e-5f);
  CHECK(ye.data()[0] == doctest::Approx(2.0f * (1.0f - 0.2f) * iv + 0.5f).epsilon(1e-4));
}

TEST_CASE("batchnorm2d rejects degenerate batches in train mode") {
  Tensor x = Tensor::from({1, 1, 1, 1}, {1.0f});
  Tensor gamma = Tensor::from({1}, {1.0f});
  Tensor beta = Tensor::from({1}, {0.0f});
  std::vector<float> rm{0.0f}, rv{1.0f};
  CHECK_THROWS_AS(op::batchnorm2d(x, gamma, beta, rm, rv, true, false),
                  DataError);
  CHECK_NOTHROW(op::batchnorm2d(x, gamma, beta, rm, rv, false, false));
}

TEST_CASE("batchnorm2d gradients agree with finite differences") {
  Rng rng(6);
  Tensor x = random_tensor({3, 2, 2, 2}, rng, -2, 2, true);
  Tensor gamma = random_tensor({2}, rng, 0.5f, 1.5f, true);
  Tensor beta = random_tensor({2}, rng, -0.5f, 0.5f, true);
  std::vector<float> rm(2, 0.0f), rv(2, 1.0f);
  auto f = [&] {
    return op::mean_all(
        op::sigmoid(op::batchnorm2d(x, gamma, beta, rm, rv, true, false)));
  };
  CHECK(checked(f, x, 1e-2) < 2e-2);
  CHECK(checked(f, gamma, 1e-2) < 5e-3);
  CHECK(checked(f, beta, 1e-2) < 5e-3);

  // eval-mode path is a plain affine map
  std::vector<float> rm2{0.3f, -0.2f}, rv2{1.4f, 0.8f};
  auto fe = [&] {
    return op::mean_all(
        op::sigmoid(op::batchnorm2d(x, gamma, beta, rm2, rv2, false, false)));
  };
  CHECK(checked(fe, x, 1e-2) < 5e-3);
  CHECK(checked(fe, gamma, 1e-2) < 5e-3);
}

TEST_CASE("pointwise op gradients") {
  Rng rng(7);
  // keep values away from the relu/leaky kinks by more than the step
  std::vector<float> v;
  for (int i = 0; i < 12; ++i) {
    float x = rng.uniform(0.2f, 1.5f);
    v.push_back(rng.uniform() < 0.5f ? -x : x);
  }
  Tensor x = Tensor::from({3, 4}, std::move(v), true);

  CHECK(checked([&] { return op::sum_all(op::relu(x)); }, x, 1e-3) < 2e-3);
  CHECK(checked([&] { return op::sum_all(op::leaky_relu(x, 0.2f)); }, x, 1e-3) < 2e-3);
  CHECK(checked([&] { return op::sum_all(op::sigmoid(x)); }, x, 1e-3) < 2e-3);
  CHECK(checked([&] { return op::sum_all(op::exp(x)); }, x, 1e-3) < 2e-3);
  CHECK(checked([&] { return op::sum_all(op::square(x)); }, x, 1e-3) < 2e-3);
  CHECK(checked([&] { return op::sum_all(op::affine(x, -2.0f, 0.3f)); }, x, 1e-3) < 2e-3);
}

TEST_CASE("leaky_relu slope and values") {
  Tensor x = Tensor::from({4}, {-2.0f, -0.5f, 0.0f, 1.5f});
  Tensor y = op::leaky_relu(x, 0.2f);
  CHECK(y.data()[0] == doctest::Approx(-0.4f));
  CHECK(y.data()[1] == doctest::Approx(-0.1f));
  CHECK(y.data()[2] == doctest::Approx(0.0f));
  CHECK(y.data()[3] == doctest::Approx(1.5f));
  CHECK_THROWS_AS(op::leaky_relu(x, 1.0f), ParameterError);
}

TEST_CASE("log_clamped floors its argument") {
  Tensor x = Tensor::from({3}, {0.0f, 1e-15f, 1.0f});
  Tensor y = op::log_clamped(x);
  CHECK(y.data()[0] == doctest::Approx(std::log(1e-12f)));
  CHECK(y.data()[1] == doctest::Approx(std::log(1e-12f)));
  CHECK(y.data()[2] == doctest::Approx(0.0f));

  // gradient is 1/x above the floor and 0 inside the clamped region
  Tensor xs = Tensor::from({2}, {0.0f, 0.5f}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = op::sum_all(op::log_clamped(xs));
  tape.backward(loss);
  CHECK(xs.grad()[0] == doctest::Approx(0.0f));
  CHECK(xs.grad()[1] == doctest::Approx(2.0f));
}

TEST_CASE("log_softmax plus nll matches the closed form") {
  Tensor logits = Tensor::from({1, 3}, {1.0f, 2.0f, 3.0f}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor logp = op::log_softmax(logits);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(logp.data()[2] == doctest::Approx(3.0 - std::log(z)).epsilon(1e-5));

  std::vector<int> target{2};
  Tensor loss = op::nll(logp, target);
  CHECK(loss.item() == doctest::Approx(std::log(z) - 3.0).epsilon(1e-5));
  tape.backward(loss);
  // d loss / d logits = softmax - onehot
  CHECK(logits.grad()[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-4));
  CHECK(logits.grad()[1] == doctest::Approx(std::exp(2.0) / z).epsilon(1e-4));
  CHECK(logits.grad()[2] == doctest::Approx(std::exp(3.0) / z - 1.0).epsilon(1e-4));
}

TEST_CASE("log_softmax rows sum to one in probability space") {
  Rng rng(8);
  Tensor x = random_tensor({4, 6}, rng, -3, 3);
  Tensor y = op::log_softmax(x);
  for (int b = 0; b < 4; ++b) {
    double acc = 0.0;
    for (int k = 0; k < 6; ++k) acc += std::exp(static_cast<double>(y.data()[b * 6 + k]));
    CHECK(acc == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("nll gradient via finite differences") {
  Rng rng(9);
  Tensor x = random_tensor({3, 5}, rng, -2, 2, true);
  std::vector<int> targets{0, 3, 4};
  auto f = [&] { return op::nll(op::log_softmax(x), targets); };
  CHECK(checked(f, x, 1e-2) < 5e-3);
  std::vector<int> bad{0, 3, 9};
  CHECK_THROWS_AS(op::nll(op::log_softmax(x), bad), ParameterError);
}

TEST_CASE("dropout scales by the keep probability") {
  Rng rng(10);
  Tensor x = Tensor::full({10000}, 1.0f);
  Tensor y = op::dropout(x, 0.5f, rng);
  int kept = 0;
  for (float v : y.values()) {
    CHECK((v == 0.0f || v == doctest::Approx(2.0f)));
    if (v != 0.0f) ++kept;
  }
  CHECK(kept > 4700);
  CHECK(kept < 5300);
  CHECK_THROWS_AS(op::dropout(x, 1.0f, rng), ParameterError);
  CHECK_THROWS_AS(op::dropout(x, -0.1f, rng), ParameterError);
}

TEST_CASE("dropout with a pinned mask is differentiable") {
  Tensor x = Tensor::from({4}, {1.0f, 2.0f, 3.0f, 4.0f}, true);
  std::vector<float> keep{1, 0, 1, 1};
  auto f = [&] { return op::sum_all(op::dropout_with_mask(x, keep, 0.25f)); };
  CHECK(checked(f, x, 1e-3) < 2e-3);
  Tensor y = op::dropout_with_mask(x, keep, 0.25f);
  CHECK(y.data()[0] == doctest::Approx(1.0f / 0.75f));
  CHECK(y.data()[1] == 0.0f);
}

TEST_CASE("grad_check flags nondeterministic functions") {
  Rng rng(11);
  Tensor x = Tensor::from({8}, std::vector<float>(8, 1.0f), true);
  // live dropout advances the shared stream between evaluations
  auto f = [&] { return op::sum_all(op::dropout(x, 0.5f, rng)); };
  GradCheckResult r = grad_check(f, x, 1e-3);
  CHECK_FALSE(r.deterministic);
}

TEST_CASE("shape ops route gradients") {
  Rng rng(12);
  Tensor a = random_tensor({3, 2}, rng, -1, 1, true);
  Tensor b = random_tensor({3, 4}, rng, -1, 1, true);
  auto f = [&] {
    Tensor cat = op::concat_cols(a, b);           // [3,6]
    Tensor sl = op::slice_cols(cat, 1, 4);        // [3,4]
    Tensor rs = op::reshape(sl, {2, 6});          // [2,6]
    std::vector<int> picks{5, 0};
    return op::mean_all(op::gather_cols(rs, picks));
  };
  CHECK(checked(f, a, 1e-3) < 2e-3);
  CHECK(checked(f, b, 1e-3) < 2e-3);

  CHECK_THROWS_AS(op::slice_cols(a, 1, 5), ParameterError);
  CHECK_THROWS_AS(op::concat_cols(a, random_tensor({2, 2}, rng, -1, 1)),
                  DimensionError);
}

TEST_CASE("channel_bias adds per channel and accumulates per channel") {
  Rng rng(13);
  Tensor x = random_tensor({2, 3, 2, 2}, rng, -1, 1, true);
  Tensor b = random_tensor({3}, rng, -0.5f, 0.5f, true);
  auto f = [&] { return op::mean_all(op::sigmoid(op::channel_bias(x, b))); };
  CHECK(checked(f, x, 1e-2) < 5e-3);
  CHECK(checked(f, b, 1e-2) < 5e-3);
}

TEST_CASE("generator-shaped composite gradient flows end to end") {
  Rng rng(14);
  Tensor z = random_tensor({2, 3}, rng, -1, 1);
  Tensor w = random_tensor({3, 4}, rng, -0.5f, 0.5f, true);
  Tensor b = random_tensor({4}, rng, -0.1f, 0.1f, true);
  Tensor k1 = random_tensor({4, 2, 2, 2}, rng, -0.5f, 0.5f, true);
  Tensor g1 = Tensor::full({2}, 1.0f, true);
  Tensor be1 = Tensor::zeros({2}, true);
  std::vector<float> rm(2, 0.0f), rv(2, 1.0f);
  Tensor k2 = random_tensor({2, 1, 4, 4}, rng, -0.5f, 0.5f, true);
  Tensor cb = random_tensor({1}, rng, -0.1f, 0.1f, true);

  auto f = [&] {
    Tensor h = op::linear(z, w, b);                       // [2,4]
    Tensor img = op::reshape(h, {2, 4, 1, 1});
    Tensor up1 = op::deconv2d(img, k1, 2, 0);             // [2,2,2,2]
    Tensor bn = op::batchnorm2d(up1, g1, be1, rm, rv, true, false);
    Tensor act = op::relu(bn);
    Tensor up2 = op::deconv2d(act, k2, 2, 1);             // [2,1,4,4]
    Tensor out = op::sigmoid(op::channel_bias(up2, cb));
    return op::mean_all(out);
  };
  // Batch norm keeps many activations near the relu kink and shrinks
  // upstream gradients toward zero, so the step must stay small enough not
  // to cross kinks (h = 5e-3) and tiny elements are compared with an
  // absolute floor of 1e-3.
  CHECK(checked(f, w, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, k1, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, k2, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, cb, 5e-3, 1e-3) < 2e-2);
}

TEST_CASE("discriminator-shaped composite gradient flows end to end") {
  Rng rng(15);
  Tensor x = random_tensor({2, 1, 4, 4}, rng, 0, 1);
  Tensor k1 = random_tensor({2, 1, 4, 4}, rng, -0.5f, 0.5f, true);
  Tensor g1 = Tensor::full({2}, 1.0f, true);
  Tensor be1 = Tensor::zeros({2}, true);
  std::vector<float> rm(2, 0.0f), rv(2, 1.0f);
  Tensor k2 = random_tensor({3, 2, 2, 2}, rng, -0.5f, 0.5f, true);
  Tensor ws = random_tensor({3, 1}, rng, -0.5f, 0.5f, true);
  Tensor bs = Tensor::zeros({1}, true);
  Tensor wc = random_tensor({3, 4}, rng, -0.5f, 0.5f, true);
  Tensor bc = Tensor::zeros({4}, true);
  std::vector<int> targets{1, 3};
  // pinned dropout mask over the [2,2,2,2] activation
  std::vector<float> keep{1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 0, 1, 1, 0, 1, 1};

  auto f = [&] {
    Tensor c1 = op::conv2d(x, k1, 2, 1);                  // [2,2,2,2]
    Tensor bn = op::batchnorm2d(c1, g1, be1, rm, rv, true, false);
    Tensor act = op::leaky_relu(bn, 0.2f);
    Tensor dp = op::dropout_with_mask(act, keep, 0.5f);   // 8 values
    Tensor c2 = op::conv2d(dp, k2, 1, 0);                 // [2,3,1,1]
    Tensor feat = op::reshape(c2, {2, 3});
    Tensor src = op::sigmoid(op::linear(feat, ws, bs));   // [2,1]
    Tensor cls = op::log_softmax(op::linear(feat, wc, bc));
    Tensor l_s = op::neg(op::mean_all(op::log_clamped(src)));
    Tensor l_c = op::nll(cls, targets);
    return op::add(l_s, l_c);
  };
  CHECK(checked(f, k1, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, k2, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, ws, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, wc, 5e-3, 1e-3) < 2e-2);
  CHECK(checked(f, g1, 5e-3, 1e-3) < 2e-2);
}

TEST_CASE("ops reject NaN-producing inputs at the boundary") {
  Tensor big = Tensor::full({2}, 100.0f);
  // exp(100) overflows float -> NumericError from the finiteness check
  CHECK_THROWS_AS(op::exp(big), NumericError);
}
