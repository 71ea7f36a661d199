#pragma once

#include <cstddef>
#include <span>

#include "mfegan/networks.hpp"
#include "mfegan/rng.hpp"
#include "mfegan/tensor.hpp"

// Loss terms for the adversarial game and the fitness scores that drive the
// evolutionary generator update.  All losses return scalar tensors suitable
// for Tape::backward; class labels are 1-based throughout.
//
// The discriminator's class head has 2N columns: column y-1 means "real
// sample of class y", column N+y-1 means "fake sample of class y".
namespace mfegan {

// The three generator objectives a reproduction step tries.  On equal
// fitness the later kind wins.
enum class MutationKind { MinMax = 0, Heuristic = 1, LeastSquare = 2 };
inline constexpr MutationKind kAllMutations[] = {
    MutationKind::MinMax, MutationKind::Heuristic, MutationKind::LeastSquare};
const char* mutation_name(MutationKind kind);

// How the generator's class term scores a fake sample of class y:
//   RealSlotProb         -mean log P(real slot y | x)
//   OneMinusRealSlotProb -mean log (1 - P(fake slot y | x))
enum class GenClassTerm { RealSlotProb, OneMinusRealSlotProb };

// -mean log s_real - mean log (1 - s_fake); inputs are [B,1] source
// probabilities.  Logs are floored (log_clamped) so saturated sigmoids
// cannot produce infinities.
Tensor d_source_loss(const Tensor& src_real, const Tensor& src_fake);

// Mean negative log-likelihood of the real batch at its real slots plus that
// of the fake batch at its fake slots; logp_* are [B,2N] log-softmax rows.
Tensor d_class_loss(const Tensor& logp_real, std::span<const int> y_real,
                    const Tensor& logp_fake, std::span<const int> y_fake,
                    int n_classes);

// Source term + class term, the objective of a discriminator update.
Tensor d_total_loss(const DiscOut& real, std::span<const int> y_real,
                    const DiscOut& fake, std::span<const int> y_fake,
                    int n_classes);

// The adversarial part of the generator objective, on [B,1] fake source
// probabilities s:
//   MinMax       mean log(1 - s)
//   Heuristic    -mean log s
//   LeastSquare  mean (s - 1)^2
Tensor g_adversarial_term(MutationKind kind, const Tensor& src_fake);

// Class part of the generator objective (see GenClassTerm).
Tensor g_class_term(const Tensor& logp_fake, std::span<const int> y,
                    int n_classes, GenClassTerm form = GenClassTerm::RealSlotProb);

// Adversarial term + class term for one mutation.
Tensor g_mutation_loss(MutationKind kind, const DiscOut& fake_out,
                       std::span<const int> y, int n_classes,
                       GenClassTerm form = GenClassTerm::RealSlotProb);

// Mean source probability the eval-mode discriminator assigns to the fake
// batch.  Untracked; leaves the discriminator untouched.
double fitness_quality(Discriminator& d, const Tensor& fake);

// -log ||g|| where g stacks the discriminator parameter gradients of
// d_total_loss on the given batches (train-mode forwards, dropout from
// `dropout_rng`, running statistics frozen).  The norm is floored at 1e-12.
// Pending parameter gradients are saved and restored around the measurement;
// parameters that had no gradient buffer are left with a zeroed one.
double fitness_diversity(Discriminator& d, const Tensor& x_real,
                         std::span<const int> y_real, const Tensor& x_fake,
                         std::span<const int> y_fake, Rng& dropout_rng);

// lambda * quality + diversity.
double fitness_total(double quality, double diversity, double lambda);

// Index of the highest fitness; ties go to the later candidate.  NaN entries
// are a caller bug (ContractError); if every entry is -infinity the whole
// generation diverged (NumericError).
std::size_t select_survivor(std::span<const double> fitness);

}  // namespace mfegan
