#include "mfegan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mfegan/errors.hpp"
#include "mfegan/ops.hpp"

namespace mfegan {

namespace {

void check_source(const Tensor& s, const char* what) {
  if (s.rank() != 2 || s.shape()[1] != 1) {
    throw DimensionError(std::string(what) + ": expected [B,1] source probabilities");
  }
}

void check_logp(const Tensor& logp, std::span<const int> y, int n_classes,
                const char* what) {
  if (logp.rank() != 2 || logp.shape()[1] != 2 * n_classes) {
    throw DimensionError(std::string(what) + ": expected [B," +
                         std::to_string(2 * n_classes) + "] log-probabilities");
  }
  if (static_cast<std::size_t>(logp.shape()[0]) != y.size()) {
    throw DimensionError(std::string(what) + ": batch and label count differ");
  }
  for (int v : y) {
    if (v < 1 || v > n_classes) {
      throw ParameterError(std::string(what) + ": label " + std::to_string(v) +
                           " outside 1.." + std::to_string(n_classes));
    }
  }
}

std::vector<int> slots(std::span<const int> y, int offset) {
  std::vector<int> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = offset + y[i] - 1;
  return t;
}

}  // namespace

const char* mutation_name(MutationKind kind) {
  switch (kind) {
    case MutationKind::MinMax: return "minmax";
    case MutationKind::Heuristic: return "heuristic";
    case MutationKind::LeastSquare: return "leastsquare";
  }
  throw ContractError("mutation_name: unknown kind");
}

Tensor d_source_loss(const Tensor& src_real, const Tensor& src_fake) {
  check_source(src_real, "d_source_loss");
  check_source(src_fake, "d_source_loss");
  Tensor real_term = ops::mean_all(ops::log_clamped(src_real));
  Tensor fake_term = ops::mean_all(ops::log_clamped(ops::one_minus(src_fake)));
  return ops::neg(ops::add(real_term, fake_term));
}

Tensor d_class_loss(const Tensor& logp_real, std::span<const int> y_real,
                    const Tensor& logp_fake, std::span<const int> y_fake,
                    int n_classes) {
  check_logp(logp_real, y_real, n_classes, "d_class_loss");
  check_logp(logp_fake, y_fake, n_classes, "d_class_loss");
  const std::vector<int> real_slots = slots(y_real, 0);
  const std::vector<int> fake_slots = slots(y_fake, n_classes);
  return ops::add(ops::nll(logp_real, real_slots),
                  ops::nll(logp_fake, fake_slots));
}

Tensor d_total_loss(const DiscOut& real, std::span<const int> y_real,
                    const DiscOut& fake, std::span<const int> y_fake,
                    int n_classes) {
  return ops::add(d_source_loss(real.source_prob, fake.source_prob),
                  d_class_loss(real.class_logprob, y_real, fake.class_logprob,
                               y_fake, n_classes));
}

Tensor g_adversarial_term(MutationKind kind, const Tensor& src_fake) {
  check_source(src_fake, "g_adversarial_term");
  switch (kind) {
    case MutationKind::MinMax:
      return ops::mean_all(ops::log_clamped(ops::one_minus(src_fake)));
    case MutationKind::Heuristic:
      return ops::neg(ops::mean_all(ops::log_clamped(src_fake)));
    case MutationKind::LeastSquare:
      return ops::mean_all(ops::square(ops::affine(src_fake, 1.0f, -1.0f)));
  }
  throw ContractError("g_adversarial_term: unknown kind");
}

Tensor g_class_term(const Tensor& logp_fake, std::span<const int> y,
                    int n_classes, GenClassTerm form) {
  check_logp(logp_fake, y, n_classes, "g_class_term");
  if (form == GenClassTerm::RealSlotProb) {
    return ops::nll(logp_fake, slots(y, 0));
  }
  // -mean log(1 - P(fake slot y | x))
  const std::vector<int> fake_slots = slots(y, n_classes);
  Tensor p = ops::exp(ops::gather_cols(logp_fake, fake_slots));
  return ops::neg(ops::mean_all(ops::log_clamped(ops::one_minus(p))));
}

Tensor g_mutation_loss(MutationKind kind, const DiscOut& fake_out,
                       std::span<const int> y, int n_classes,
                       GenClassTerm form) {
  return ops::add(g_adversarial_term(kind, fake_out.source_prob),
                  g_class_term(fake_out.class_logprob, y, n_classes, form));
}

double fitness_quality(Discriminator& d, const Tensor& fake) {
  NoGradScope guard;
  DiscOut out = discriminate(d, fake, false, false, nullptr);
  return ops::mean_all(out.source_prob).item_f64();
}

double fitness_diversity(Discriminator& d, const Tensor& x_real,
                         std::span<const int> y_real, const Tensor& x_fake,
                         std::span<const int> y_fake, Rng& dropout_rng) {
  std::vector<Tensor> params = d.parameters();

  // Make room for a clean gradient measurement without losing pending grads.
  std::vector<std::optional<std::vector<float>>> saved(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].has_grad()) {
      auto g = params[i].grad();
      saved[i] = std::vector<float>(g.begin(), g.end());
    }
    params[i].zero_grad();
  }

  Tape tape;
  {
    TapeScope scope(tape);
    DiscOut real = discriminate(d, x_real, true, false, &dropout_rng);
    DiscOut fake = discriminate(d, x_fake, true, false, &dropout_rng);
    Tensor loss = d_total_loss(real, y_real, fake, y_fake, d.n_classes);
    tape.backward(loss);
  }

  double sq = 0.0;
  for (Tensor& p : params) {
    for (float v : p.grad()) sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);

  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].zero_grad();
    if (saved[i]) {
      std::copy(saved[i]->begin(), saved[i]->end(), params[i].grad().begin());
    }
  }
  return -std::log(std::max(norm, 1e-12));
}

double fitness_total(double quality, double diversity, double lambda) {
  return lambda * quality + diversity;
}

std::size_t select_survivor(std::span<const double> fitness) {
  if (fitness.empty()) throw ContractError("select_survivor: no candidates");
  std::size_t best = 0;
  bool any_finite = false;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    if (std::isnan(fitness[i])) {
      throw ContractError("select_survivor: fitness is NaN");
    }
    if (fitness[i] != -std::numeric_limits<double>::infinity()) any_finite = true;
    if (fitness[i] >= fitness[best]) best = i;
  }
  if (!any_finite) {
    throw NumericError("select_survivor: every candidate diverged");
  }
  return best;
}

}  // namespace mfegan
