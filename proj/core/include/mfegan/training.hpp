#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mfegan/hsi.hpp"
#include "mfegan/losses.hpp"
#include "mfegan/networks.hpp"
#include "mfegan/optim.hpp"

// Training loops.  Every run is a pure function of (patches, config, seed):
// batch order, latent draws, dropout masks and initialization all come from
// streams derived from the seed, so a rerun reproduces the trace bit for bit.
// The real-batch schedule (epoch shuffles) depends only on the seed, not on
// the variant, so different variants consume identical real batches.
namespace mfegan {

struct TrainConfig {
  int batch = 16;
  int epochs = 100;
  double lambda = 0.5;  // fitness mix between quality and diversity
  int d_steps = 1;      // discriminator updates per generator update
  GenClassTerm gen_class_term = GenClassTerm::RealSlotProb;
  AdamConfig adam_g, adam_d;
  bool oversample = false;  // balance the training patches up front
  LayerWidths widths;       // shrunk by tests

  void validate() const;  // ParameterError on nonsense
};

// One optimizer step worth of measurements.  Which fields are meaningful
// depends on the variant: a plain classifier fills only loss_c, the
// adversarial variants fill the three discriminator losses, the evolutionary
// one adds per-child fitness and the surviving mutation.
struct TraceRow {
  int epoch = 0;  // 1-based
  int batch = 0;  // 1-based within the epoch
  double loss_s = 0.0;
  double loss_c = 0.0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double fq[3] = {0.0, 0.0, 0.0};
  double fd[3] = {0.0, 0.0, 0.0};
  double fm[3] = {0.0, 0.0, 0.0};
  int survivor = -1;  // MutationKind index, -1 when not evolutionary
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<double> epoch_seconds;  // wall time, one entry per epoch
};

enum class Variant { Cnn, Acgan, Mfegan };

struct TrainResult {
  Variant variant = Variant::Cnn;
  Generator g;  // undefined tensors for the plain classifier
  Discriminator d;
  TrainTrace trace;
};

// ---- single steps (exposed for tests; the loops below drive them) -----------------

// Discriminator update: fake labels and latents from the step's latent
// stream, generator run untracked with frozen running stats, one Adam step
// on the discriminator.  Fills loss_s / loss_c / loss_d.
void train_step_d(Generator& g, Discriminator& d, Adam& opt_d,
                  const Tensor& x_real, std::span<const int> y_real,
                  std::uint64_t seed, std::uint64_t step, TraceRow& row);

// Classic generator update (the heuristic objective), fresh latent batch,
// discriminator running stats frozen and its stray gradients cleared.
// Fills loss_g.
void train_step_g(Generator& g, Adam& opt_g, Discriminator& d,
                  const TrainConfig& cfg, std::uint64_t seed,
                  std::uint64_t step, TraceRow& row);

// Evolutionary generator update: one child per mutation objective (shared
// latent batch, per-child dropout streams), each child Adam-stepped from a
// clone of the parent optimizer, then scored
//   quality   mean eval-mode source probability of a fresh fake batch
//   diversity -log discriminator gradient norm on (real batch, that batch)
//   total     lambda * quality + diversity
// A child whose update or scoring hits a numeric fault scores -infinity.
// The best child (ties to the later mutation) replaces the parent and its
// optimizer; if every child diverged the step aborts with NumericError.
// Fills fq / fd / fm / survivor.
void train_step_g_evolutionary(Generator& g, Adam& opt_g, Discriminator& d,
                               const Tensor& x_real,
                               std::span<const int> y_real,
                               const TrainConfig& cfg, std::uint64_t seed,
                               std::uint64_t step, TraceRow& row);

// Classifier update: class head restricted to the N real columns, Adam over
// the trunk and class head (the source head never moves).  Fills loss_c.
void train_step_cnn(Discriminator& d, Adam& opt_cls, const Tensor& x_real,
                    std::span<const int> y_real, std::uint64_t seed,
                    std::uint64_t step, TraceRow& row);

// ---- full loops --------------------------------------------------------------------

// Invoked after each completed epoch with the trace so far (for progress
// reporting; the callback does not influence the run).
using EpochCallback = std::function<void(int epoch, const TrainTrace& trace)>;

// All loops share the schedule: per epoch, a seed-derived shuffle of the
// (optionally oversampled) patches, consumed in full batches of cfg.batch
// (the remainder is dropped).  Patches must have 3 channels.  The
// adversarial variants run cfg.d_steps discriminator updates on each real
// batch before the generator update; the trace row keeps the last one's
// losses.  With the default d_steps = 1 the discriminator stream indices
// coincide with the global batch counter.  A NumericError mid-run is
// rethrown with the last completed trace row appended to its message.
TrainResult train_mfegan(const PatchSet& patches, const TrainConfig& cfg,
                         std::uint64_t seed, const EpochCallback& on_epoch = {});
TrainResult train_acgan(const PatchSet& patches, const TrainConfig& cfg,
                        std::uint64_t seed, const EpochCallback& on_epoch = {});
TrainResult train_cnn(const PatchSet& patches, const TrainConfig& cfg,
                      std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace mfegan
