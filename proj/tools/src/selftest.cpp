#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "mfegan/errors.hpp"
#include "mfegan/evaluation.hpp"
#include "mfegan/gradcheck.hpp"
#include "mfegan/losses.hpp"
#include "mfegan/networks.hpp"
#include "mfegan/ops.hpp"
#include "mfegan/rng.hpp"
#include "mfegan/tensor.hpp"

// Engine self-test: every check is deterministic (fixed seeds throughout),
// so a passing build always passes and a failure always reproduces.
namespace mfegan::cli {

namespace {

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string = pass
};

Tensor rand_tensor(Shape shape, Rng& rng, float lo, float hi) {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<float> v(n);
  for (float& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(shape, std::move(v), true);
}

// Values in [0.25, 1] with random sign: safely away from the kink at zero
// so central differences of relu-like functions stay exact.
Tensor rand_signed(Shape shape, Rng& rng) {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<float> v(n);
  for (float& x : v) {
    x = rng.uniform(0.25f, 1.0f) * (rng.uniform() < 0.5f ? -1.0f : 1.0f);
  }
  return Tensor::from(shape, std::move(v), true);
}

std::string describe(const GradCheckResult& r, double tol) {
  if (!r.deterministic) return "forward pass is nondeterministic";
  if (r.max_rel_error < tol) return "";
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max rel err %.3e (analytic %.6e vs numeric %.6e)",
                r.max_rel_error, r.analytic_at_worst, r.numeric_at_worst);
  return buf;
}

// Runs grad_check against every listed target and keeps the worst result.
std::string grad_suite(const std::function<Tensor()>& f,
                       std::vector<Tensor> targets, double h, double floor,
                       double tol) {
  for (Tensor& t : targets) {
    const GradCheckResult r = grad_check(f, t, h, floor);
    const std::string verdict = describe(r, tol);
    if (!verdict.empty()) return verdict;
  }
  return "";
}

constexpr double kTol = 1e-3;
constexpr double kH = 5e-3;
constexpr double kFloor = 1e-4;

std::vector<Check> gradient_checks(bool inject_grad_bug) {
  std::vector<Check> checks;

  checks.push_back({"grad linear", [] {
    Rng rng(101);
    Tensor x = rand_tensor({3, 4}, rng, -1, 1);
    Tensor w = rand_tensor({4, 5}, rng, -1, 1);
    Tensor b = rand_tensor({5}, rng, -0.5f, 0.5f);
    const auto f = [&] { return ops::mean_all(ops::linear(x, w, b)); };
    return grad_suite(f, {x, w, b}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad channel_bias", [] {
    Rng rng(102);
    Tensor x = rand_tensor({2, 3, 2, 2}, rng, -1, 1);
    Tensor b = rand_tensor({3}, rng, -0.5f, 0.5f);
    const auto f = [&] { return ops::mean_all(ops::channel_bias(x, b)); };
    return grad_suite(f, {x, b}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad conv2d", [inject_grad_bug] {
    Rng rng(103);
    Tensor x = rand_tensor({2, 3, 5, 5}, rng, -1, 1);
    Tensor k = rand_tensor({4, 3, 3, 3}, rng, -0.5f, 0.5f);
    const auto f = [&, inject_grad_bug] {
      Tensor input = x;
      if (inject_grad_bug) {
        // Fault fixture: half the input bypasses the tape, so the analytic
        // gradient comes out at half the true value.
        input = ops::add(ops::affine(x, 0.5f, 0.0f),
                         ops::affine(x.detach(), 0.5f, 0.0f));
      }
      return ops::mean_all(ops::square(ops::conv2d(input, k, 2, 1)));
    };
    // Quadratic objective: central differences are exact, so a larger step
    // only reduces float32 rounding noise.
    return grad_suite(f, {x, k}, 1e-2, 1e-3, kTol);
  }});

  checks.push_back({"grad deconv2d", [] {
    Rng rng(104);
    Tensor x = rand_tensor({2, 3, 3, 3}, rng, -1, 1);
    Tensor k = rand_tensor({3, 4, 4, 4}, rng, -0.5f, 0.5f);
    const auto f = [&] {
      return ops::mean_all(ops::square(ops::deconv2d(x, k, 2, 1)));
    };
    return grad_suite(f, {x, k}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad batchnorm2d (train)", [] {
    Rng rng(105);
    Tensor x = rand_tensor({4, 3, 2, 2}, rng, -1, 1);
    Tensor gamma = rand_tensor({3}, rng, 0.5f, 1.5f);
    Tensor beta = rand_tensor({3}, rng, -0.5f, 0.5f);
    // Fixed random weighting: a plain second moment of the normalized
    // output is almost constant by construction, which would leave nothing
    // for the input gradient to grab onto.
    const Tensor w = rand_tensor({4, 3, 2, 2}, rng, 0.5f, 1.5f).detach();
    std::vector<float> mean(3, 0.0f), var(3, 1.0f);
    const auto f = [&] {
      return ops::mean_all(ops::mul(
          ops::batchnorm2d(x, gamma, beta, mean, var, true, false), w));
    };
    return grad_suite(f, {x, gamma, beta}, 1e-2, 1e-2, kTol);
  }});

  checks.push_back({"grad batchnorm2d (eval)", [] {
    Rng rng(106);
    Tensor x = rand_tensor({4, 3, 2, 2}, rng, -1, 1);
    Tensor gamma = rand_tensor({3}, rng, 0.5f, 1.5f);
    Tensor beta = rand_tensor({3}, rng, -0.5f, 0.5f);
    std::vector<float> mean = {0.2f, -0.1f, 0.05f};
    std::vector<float> var = {0.8f, 1.3f, 0.6f};
    const auto f = [&] {
      return ops::mean_all(ops::square(
          ops::batchnorm2d(x, gamma, beta, mean, var, false, false)));
    };
    return grad_suite(f, {x, gamma, beta}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad relu", [] {
    Rng rng(107);
    Tensor x = rand_signed({3, 6}, rng);
    const auto f = [&] { return ops::mean_all(ops::relu(x)); };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad leaky_relu", [] {
    Rng rng(108);
    Tensor x = rand_signed({3, 6}, rng);
    const auto f = [&] {
      return ops::mean_all(ops::square(ops::leaky_relu(x, 0.2f)));
    };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad sigmoid", [] {
    Rng rng(109);
    Tensor x = rand_tensor({3, 5}, rng, -2, 2);
    const auto f = [&] { return ops::mean_all(ops::sigmoid(x)); };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad exp", [] {
    Rng rng(110);
    Tensor x = rand_tensor({3, 5}, rng, -1, 1);
    const auto f = [&] { return ops::mean_all(ops::exp(x)); };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad log", [] {
    Rng rng(111);
    Tensor x = rand_tensor({3, 5}, rng, 0.5f, 2.0f);
    const auto f = [&] { return ops::mean_all(ops::log_clamped(x)); };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad log_softmax", [] {
    Rng rng(112);
    Tensor x = rand_tensor({4, 5}, rng, -1, 1);
    const std::vector<int> targets = {0, 3, 1, 4};
    const auto f = [&] { return ops::nll(ops::log_softmax(x), targets); };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad dropout (fixed mask)", [] {
    Rng rng(113);
    Tensor x = rand_tensor({4, 6}, rng, -1, 1);
    std::vector<float> keep(24);
    for (float& v : keep) v = rng.uniform() < 0.5f ? 0.0f : 1.0f;
    const auto f = [&] {
      return ops::mean_all(ops::square(ops::dropout_with_mask(x, keep, 0.5f)));
    };
    return grad_suite(f, {x}, kH, kFloor, kTol);
  }});

  checks.push_back({"grad composed D(G(z)) miniature", [] {
    const LayerWidths tiny{8, 6, 4};
    Generator g = build_generator(4, 2, 991, tiny);
    Discriminator d = build_discriminator(4, 2, 992, tiny);
    Rng rng(993);
    const std::vector<int> y = sample_labels(3, 2, rng);
    const Tensor z = latent_input(y, 2, rng);
    const std::vector<int> targets = {y[0] - 1, y[1] - 1, y[2] - 1};
    const auto f = [&] {
      Tensor fake = generate(g, z, true, false);
      DiscOut out = discriminate(d, fake, false, false, nullptr);
      return ops::add(ops::mean_all(out.source_prob),
                      ops::nll(out.class_logprob, targets));
    };
    // Freshly initialized weights carry gradients near the float32 noise
    // floor; the wider denominator floor judges those on absolute error.
    return grad_suite(f, {g.dc2_k, g.lin_w, d.c1_k, d.cls_w}, 1e-2, 1e-2,
                      kTol);
  }});

  return checks;
}

std::vector<Check> shape_checks() {
  std::vector<Check> checks;
  for (const int sp : {20, 24, 28}) {
    for (const int n : {2, 13, 16}) {
      checks.push_back({"shapes sp=" + std::to_string(sp) +
                            " n=" + std::to_string(n),
                        [sp, n]() -> std::string {
        Generator g = build_generator(sp, n, 55);
        Discriminator d = build_discriminator(sp, n, 56);
        Rng rng(57);
        const std::vector<int> y = sample_labels(2, n, rng);
        const Tensor z = latent_input(y, n, rng);
        if (z.shape() != Shape{2, kLatentDim + n}) {
          return "latent batch is not [B,100+N]";
        }
        NoGradScope no_grad;
        const Tensor fake = generate(g, z, false, false);
        if (fake.shape() != Shape{2, 3, sp, sp}) {
          return "generator output is not [B,3,SP,SP]";
        }
        DiscOut out = discriminate(d, fake, false, false, nullptr);
        if (out.source_prob.shape() != Shape{2, 1}) {
          return "source head is not [B,1]";
        }
        if (out.class_logits.shape() != Shape{2, 2 * n}) {
          return "class head is not [B,2N]";
        }
        if (d.c3_k.shape()[0] != 512 || d.src_w.shape()[0] != 512) {
          return "trunk width is not 512";
        }
        const int quarter = sp / 4;
        if (d.c3_k.shape()[2] != quarter || g.dc1_k.shape()[2] != quarter) {
          return "innermost kernels are not SP/4";
        }
        return "";
      }});
    }
  }
  return checks;
}

std::vector<Check> oracle_checks() {
  std::vector<Check> checks;

  checks.push_back({"metrics worked example", []() -> std::string {
    const std::vector<std::size_t> cm = {40, 10, 5, 45};
    const Metrics m = compute_metrics(cm, 2);
    if (std::abs(m.oa - 0.85) > 1e-9) return "OA != 0.85";
    if (std::abs(m.aa - 0.85) > 1e-9) return "AA != 0.85";
    if (std::abs(m.kappa - 0.70) > 1e-9) return "kappa != 0.70";
    return "";
  }});

  checks.push_back({"mcnemar statistic", []() -> std::string {
    std::vector<int> truth, a, b;
    for (int i = 0; i < 40; ++i) {
      truth.push_back(1);
      a.push_back(1);
      b.push_back(2);
    }
    for (int i = 0; i < 10; ++i) {
      truth.push_back(1);
      a.push_back(2);
      b.push_back(1);
    }
    const double m = mcnemar(truth, a, b);
    if (std::abs(m - 4.243) > 1e-3) return "discordants (40,10) != 4.243";
    if (mcnemar(truth, a, a) != 0.0) return "identical predictions != 0";
    return "";
  }});

  checks.push_back({"source loss at D=1/2", []() -> std::string {
    NoGradScope no_grad;
    const Tensor half = Tensor::full({4, 1}, 0.5f);
    const double ls = d_source_loss(half, half).item_f64();
    if (std::abs(ls - 1.3863) > 1e-3) return "L^S != 1.3863";
    return "";
  }});

  checks.push_back({"class loss at uniform head", []() -> std::string {
    NoGradScope no_grad;
    // N=4: log-probabilities uniform over the 2N=8 slots
    const Tensor logp =
        Tensor::full({4, 8}, std::log(1.0f / 8.0f));
    const std::vector<int> y = {1, 2, 3, 4};
    const double lc = d_class_loss(logp, y, logp, y, 4).item_f64();
    if (std::abs(lc - 4.1589) > 1e-3) return "L^C != 4.1589";
    return "";
  }});

  checks.push_back({"adversarial terms at D=1/2", []() -> std::string {
    NoGradScope no_grad;
    const Tensor half = Tensor::full({4, 1}, 0.5f);
    const double mm =
        g_adversarial_term(MutationKind::MinMax, half).item_f64();
    const double he =
        g_adversarial_term(MutationKind::Heuristic, half).item_f64();
    const double ls =
        g_adversarial_term(MutationKind::LeastSquare, half).item_f64();
    if (std::abs(mm + 0.6931) > 1e-4) return "minmax term != -0.6931";
    if (std::abs(he - 0.6931) > 1e-4) return "heuristic term != +0.6931";
    if (std::abs(ls - 0.25) > 1e-4) return "least-square term != 0.25";
    return "";
  }});

  checks.push_back({"survivor selection", []() -> std::string {
    Rng rng(314);
    for (int trial = 0; trial < 500; ++trial) {
      double f[3];
      for (double& v : f) {
        // coarse grid so ties actually happen
        v = rng.uniform_int(-3, 3) * 0.5;
      }
      std::size_t want = 0;
      for (std::size_t i = 1; i < 3; ++i) {
        if (f[i] >= f[want]) want = i;  // ties resolve to the later kind
      }
      if (select_survivor(f) != want) return "survivor mismatch";
      const double q = rng.uniform(0, 1), d = rng.uniform(-9, 2);
      if (std::abs(fitness_total(q, d, 0.5) - (0.5 * q + d)) > 1e-9) {
        return "F_m != 0.5*F_q + F_d";
      }
    }
    return "";
  }});

  return checks;
}

}  // namespace

int cmd_selftest(bool inject_grad_bug) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<Check> checks = gradient_checks(inject_grad_bug);
  for (auto& c : shape_checks()) checks.push_back(std::move(c));
  for (auto& c : oracle_checks()) checks.push_back(std::move(c));

  int failures = 0;
  for (const Check& check : checks) {
    std::string verdict;
    try {
      verdict = check.run();
    } catch (const std::exception& e) {
      verdict = std::string("exception: ") + e.what();
    }
    std::printf("%-36s %s\n", check.name.c_str(),
                verdict.empty() ? "ok" : ("FAIL: " + verdict).c_str());
    std::fflush(stdout);
    if (!verdict.empty()) ++failures;
  }

  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - started;
  if (failures == 0) {
    std::printf("selftest: all %zu checks passed (%.2f s)\n", checks.size(),
                elapsed.count());
  } else {
    std::printf("selftest: %d of %zu checks FAILED (%.2f s)\n", failures,
                checks.size(), elapsed.count());
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace mfegan::cli
