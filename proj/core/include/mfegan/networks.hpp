#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfegan/checkpoint.hpp"
#include "mfegan/hsi.hpp"
#include "mfegan/rng.hpp"
#include "mfegan/tensor.hpp"

// The two networks: a generator that maps a latent+class vector to an
// sp x sp x 3 patch and a discriminator with a real/fake head and a 2N-way
// class head (N real classes followed by N fake classes).
namespace mfegan {

inline constexpr int kLatentDim = 100;

// Channel widths of the three hidden stages.  The generator runs a -> b -> c
// wide-to-narrow, the discriminator mirrors it c -> b -> a.  The defaults are
// the full-size model; tests shrink them to keep finite differencing cheap.
struct LayerWidths {
  int a = 512;
  int b = 256;
  int c = 128;
};

struct BatchNormParams {
  Tensor gamma, beta;  // trainable, [C]
  std::vector<float> running_mean, running_var;
};

// Generator:
//   linear(latent+N -> a) + relu, reshaped to [B,a,1,1]
//   deconv(a -> b, k=sp/4, s1, p0) + bn + relu   -> [B,b,sp/4,sp/4]
//   deconv(b -> c, k4, s2, p1)     + bn + relu   -> [B,c,sp/2,sp/2]
//   deconv(c -> 3, k4, s2, p1) + bias + sigmoid  -> [B,3,sp,sp]
// Hidden deconvs carry no bias (the following norm would absorb it).
// Copies alias the parameters (like Tensor); use clone() for a deep copy.
struct Generator {
  int sp = 0;
  int n_classes = 0;
  LayerWidths widths;

  Tensor lin_w, lin_b;
  Tensor dc1_k;
  BatchNormParams bn1;
  Tensor dc2_k;
  BatchNormParams bn2;
  Tensor dc3_k, dc3_b;

  std::vector<Tensor> parameters();
  Generator clone() const;
};

// Discriminator:
//   conv(3 -> c, k4, s2, p1) + bn + leaky(0.2) + dropout(0.5)
//   conv(c -> b, k4, s2, p1) + bn + leaky + dropout
//   conv(b -> a, k=sp/4, s1, p0) + bn + leaky + dropout -> [B,a,1,1]
//   source head: linear(a -> 1) + sigmoid
//   class head:  linear(a -> 2N) + log-softmax
// Convolutions carry no bias; the heads do.
struct Discriminator {
  int sp = 0;
  int n_classes = 0;
  LayerWidths widths;
  float leaky_slope = 0.2f;
  float dropout_p = 0.5f;

  Tensor c1_k;
  BatchNormParams bn1;
  Tensor c2_k;
  BatchNormParams bn2;
  Tensor c3_k;
  BatchNormParams bn3;
  Tensor src_w, src_b;
  Tensor cls_w, cls_b;

  std::vector<Tensor> parameters();
  // The trunk and class head only — the set the plain classifier trains.
  std::vector<Tensor> classifier_parameters();
  Discriminator clone() const;
};

// Fresh networks with all parameters gradient-tracked.  Weights and batch
// norm gains draw from the init stream of `seed` (one stream per network,
// tensors in forward order, elements in storage order): weights N(0, 0.02),
// gains N(1, 0.02); biases and shifts start at zero, running stats at (0, 1).
// sp must be a positive multiple of 4.
Generator build_generator(int sp, int n_classes, std::uint64_t seed,
                          LayerWidths widths = {});
Discriminator build_discriminator(int sp, int n_classes, std::uint64_t seed,
                                  LayerWidths widths = {});

// One uniform class draw in 1..n_classes per sample.
std::vector<int> sample_labels(int count, int n_classes, Rng& rng);

// [count, kLatentDim + n_classes]: each row holds kLatentDim U(-1,1) draws
// (row by row) followed by the one-hot encoding of its 1-based label.
Tensor latent_input(std::span<const int> labels, int n_classes, Rng& rng);

// Packs the selected patches into a [B, channels, sp, sp] batch.
Tensor patch_batch(const PatchSet& patches, std::span<const std::uint32_t> indices);

// Generator forward.  train selects batch-statistics normalization (batch of
// at least 2); update_running folds the batch statistics into the running
// estimates.
Tensor generate(Generator& g, const Tensor& z, bool train, bool update_running);

struct DiscOut {
  Tensor source_prob;    // [B,1], sigmoid output
  Tensor class_logprob;  // [B,2N], log-softmax rows
  Tensor class_logits;   // [B,2N], pre-softmax
};

// Discriminator forward.  Dropout fires only when train is set, drawing its
// masks from `dropout_rng` (required then, layer by layer).
DiscOut discriminate(Discriminator& d, const Tensor& x, bool train,
                     bool update_running, Rng* dropout_rng);

// Untracked eval-mode forward; argmax over the N real-class log-probability
// columns, ties resolved to the lower class id.  Returns 1-based labels.
std::vector<int> classify(Discriminator& d, const Tensor& x);

// Checkpoint records (parameters and running statistics) under the given
// prefix, e.g. "g" -> "g.lin.w".  load_* demands exactly matching names and
// shapes (ContractError otherwise) and overwrites values in place.
std::vector<CheckpointRecord> generator_records(const Generator& g,
                                                const std::string& prefix);
std::vector<CheckpointRecord> discriminator_records(const Discriminator& d,
                                                    const std::string& prefix);
void load_generator(Generator& g, std::span<const CheckpointRecord> records,
                    const std::string& prefix);
void load_discriminator(Discriminator& d,
                        std::span<const CheckpointRecord> records,
                        const std::string& prefix);

}  // namespace mfegan
