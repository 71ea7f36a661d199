#include "mfegan/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "mfegan/errors.hpp"
#include "mfegan/ops.hpp"

namespace mfegan {

namespace {

std::vector<int> to_targets(std::span<const int> labels) {
  std::vector<int> t(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) t[i] = labels[i] - 1;
  return t;
}

void clear_grads(std::vector<Tensor> params) {
  for (Tensor& t : params) t.zero_grad();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 2) {
    throw ParameterError("train: batch must be at least 2 for batch statistics");
  }
  if (epochs < 0) throw ParameterError("train: negative epoch count");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ParameterError("train: lambda must lie in [0,1]");
  }
  if (d_steps < 1) {
    throw ParameterError("train: need at least one discriminator step");
  }
}

// ---- steps -------------------------------------------------------------------------

void train_step_d(Generator& g, Discriminator& d, Adam& opt_d,
                  const Tensor& x_real, std::span<const int> y_real,
                  std::uint64_t seed, std::uint64_t step, TraceRow& row) {
  const int N = d.n_classes;
  const int B = x_real.shape()[0];

  Rng latent_rng(derive_seed(seed, {stream::kDStepLatent, step}));
  const std::vector<int> y_fake = sample_labels(B, N, latent_rng);
  Tensor z = latent_input(y_fake, N, latent_rng);

  Tensor x_fake;
  {
    // the generator is a fixture here: untracked, running stats frozen
    NoGradScope no_grad;
    x_fake = generate(g, z, true, false);
  }

  Rng dropout_rng(derive_seed(seed, {stream::kDStepDropout, step}));
  Tape tape;
  {
    TapeScope scope(tape);
    DiscOut real = discriminate(d, x_real, true, true, &dropout_rng);
    DiscOut fake = discriminate(d, x_fake, true, true, &dropout_rng);
    Tensor ls = d_source_loss(real.source_prob, fake.source_prob);
    Tensor lc = d_class_loss(real.class_logprob, y_real, fake.class_logprob,
                             y_fake, N);
    Tensor ld = ops::add(ls, lc);
    row.loss_s = ls.item_f64();
    row.loss_c = lc.item_f64();
    row.loss_d = ld.item_f64();
    tape.backward(ld);
  }
  opt_d.step();
}

void train_step_g(Generator& g, Adam& opt_g, Discriminator& d,
                  const TrainConfig& cfg, std::uint64_t seed,
                  std::uint64_t step, TraceRow& row) {
  const int N = g.n_classes;

  Rng latent_rng(derive_seed(seed, {stream::kGUpdateLatent, step}));
  const std::vector<int> y = sample_labels(cfg.batch, N, latent_rng);
  Tensor z = latent_input(y, N, latent_rng);

  Rng dropout_rng(derive_seed(seed, {stream::kGUpdateDropout, step}));
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor fake = generate(g, z, true, true);
    DiscOut out = discriminate(d, fake, true, false, &dropout_rng);
    Tensor lg = g_mutation_loss(MutationKind::Heuristic, out, y, N,
                                cfg.gen_class_term);
    row.loss_g = lg.item_f64();
    tape.backward(lg);
  }
  opt_g.step();
  clear_grads(d.parameters());  // the taped pass left gradients on the critic
}

void train_step_g_evolutionary(Generator& g, Adam& opt_g, Discriminator& d,
                               const Tensor& x_real,
                               std::span<const int> y_real,
                               const TrainConfig& cfg, std::uint64_t seed,
                               std::uint64_t step, TraceRow& row) {
  const int N = g.n_classes;

  // every child consumes the same latent batch
  Rng latent_rng(derive_seed(seed, {stream::kGUpdateLatent, step}));
  const std::vector<int> y = sample_labels(cfg.batch, N, latent_rng);
  Tensor z = latent_input(y, N, latent_rng);

  // fitness latent batch, drawn once: every child is scored on the same
  // noise so the comparison is paired rather than draw-to-draw
  Rng fq_rng(derive_seed(seed, {stream::kFitnessLatent, step}));
  const std::vector<int> yq = sample_labels(cfg.batch, N, fq_rng);
  const Tensor zq = latent_input(yq, N, fq_rng);

  Generator children[3];
  Adam opts[3];
  double fm[3];
  for (std::size_t k = 0; k < 3; ++k) {
    children[k] = g.clone();
    opts[k] = opt_g.clone_for(children[k].parameters());
    try {
      // same masks for each child too — only the objective may differ
      Rng dropout_rng(derive_seed(seed, {stream::kGUpdateDropout, step}));
      Tape tape;
      {
        TapeScope scope(tape);
        Tensor fake = generate(children[k], z, true, true);
        DiscOut out = discriminate(d, fake, true, false, &dropout_rng);
        Tensor lg = g_mutation_loss(kAllMutations[k], out, y, N,
                                    cfg.gen_class_term);
        tape.backward(lg);
      }
      opts[k].step();
      clear_grads(d.parameters());

      // quality: the shared fake batch scored by the eval-mode critic
      Tensor xq;
      {
        NoGradScope no_grad;
        xq = generate(children[k], zq, true, false);
      }
      row.fq[k] = fitness_quality(d, xq);

      // diversity: critic gradient norm on (real batch, that fake batch)
      Rng fd_rng(derive_seed(seed, {stream::kFitnessDropout, step}));
      row.fd[k] = fitness_diversity(d, x_real, y_real, xq, yq, fd_rng);
      row.fm[k] = fitness_total(row.fq[k], row.fd[k], cfg.lambda);
    } catch (const NumericError&) {
      // the child diverged; rule it out and keep the critic clean
      clear_grads(d.parameters());
      constexpr double inf = std::numeric_limits<double>::infinity();
      row.fq[k] = -inf;
      row.fd[k] = -inf;
      row.fm[k] = -inf;
    }
    fm[k] = row.fm[k];
  }

  const std::size_t s = select_survivor(fm);  // NumericError if all died
  row.survivor = static_cast<int>(s);
  g = std::move(children[s]);
  opt_g = std::move(opts[s]);
}

void train_step_cnn(Discriminator& d, Adam& opt_cls, const Tensor& x_real,
                    std::span<const int> y_real, std::uint64_t seed,
                    std::uint64_t step, TraceRow& row) {
  const int N = d.n_classes;

  Rng dropout_rng(derive_seed(seed, {stream::kDStepDropout, step}));
  Tape tape;
  {
    TapeScope scope(tape);
    DiscOut out = discriminate(d, x_real, true, true, &dropout_rng);
    Tensor logits = ops::slice_cols(out.class_logits, 0, N);
    Tensor logp = ops::log_softmax(logits);
    Tensor lc = ops::nll(logp, to_targets(y_real));
    row.loss_c = lc.item_f64();
    tape.backward(lc);
  }
  opt_cls.step();
}

// ---- loops -------------------------------------------------------------------------

namespace {

// Renders the last completed row for abort messages.
std::string describe_last(const TrainTrace& trace) {
  if (trace.rows.empty()) return "no step completed";
  const TraceRow& r = trace.rows.back();
  return "last completed step: epoch " + std::to_string(r.epoch) + " batch " +
         std::to_string(r.batch) + " loss_s=" + std::to_string(r.loss_s) +
         " loss_c=" + std::to_string(r.loss_c) +
         " loss_d=" + std::to_string(r.loss_d);
}

TrainResult run_loop(Variant variant, const PatchSet& input,
                     const TrainConfig& cfg, std::uint64_t seed,
                     const EpochCallback& on_epoch) {
  cfg.validate();
  if (input.channels != 3) {
    throw DataError("train: patches must carry 3 channels, got " +
                    std::to_string(input.channels));
  }
  if (input.count() == 0) throw DataError("train: no training patches");

  PatchSet balanced;
  const PatchSet* patches = &input;
  if (cfg.oversample) {
    balanced = random_oversample(input, seed);
    patches = &balanced;
  }
  if (patches->count() < static_cast<std::size_t>(cfg.batch)) {
    throw DataError("train: fewer patches (" +
                    std::to_string(patches->count()) + ") than one batch (" +
                    std::to_string(cfg.batch) + ")");
  }
  const int N = patches->n_classes;

  TrainResult res;
  res.variant = variant;
  res.d = build_discriminator(patches->sp, N, seed, cfg.widths);
  Adam opt_d, opt_g, opt_cls;
  if (variant == Variant::Cnn) {
    opt_cls = Adam(res.d.classifier_parameters(), cfg.adam_d);
  } else {
    res.g = build_generator(patches->sp, N, seed, cfg.widths);
    opt_g = Adam(res.g.parameters(), cfg.adam_g);
    opt_d = Adam(res.d.parameters(), cfg.adam_d);
  }

  std::vector<std::uint32_t> order(patches->count());
  std::iota(order.begin(), order.end(), 0u);
  const int steps = static_cast<int>(patches->count()) / cfg.batch;

  std::uint64_t gstep = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(
        seed, {stream::kEpochShuffle, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    for (int b = 1; b <= steps; ++b) {
      ++gstep;
      std::span<const std::uint32_t> idx(
          order.data() + static_cast<std::size_t>(b - 1) * cfg.batch,
          static_cast<std::size_t>(cfg.batch));
      Tensor x_real = patch_batch(*patches, idx);
      std::vector<int> y_real(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        y_real[i] = patches->labels[idx[i]];
      }

      TraceRow row;
      row.epoch = epoch;
      row.batch = b;
      // Extra discriminator steps get their own stream indices; at the
      // default d_steps = 1 this reduces to the global batch counter.
      const auto d_base =
          (gstep - 1) * static_cast<std::uint64_t>(cfg.d_steps);
      try {
        switch (variant) {
          case Variant::Cnn:
            train_step_cnn(res.d, opt_cls, x_real, y_real, seed, gstep, row);
            break;
          case Variant::Acgan:
            for (int j = 1; j <= cfg.d_steps; ++j) {
              train_step_d(res.g, res.d, opt_d, x_real, y_real, seed,
                           d_base + static_cast<std::uint64_t>(j), row);
            }
            train_step_g(res.g, opt_g, res.d, cfg, seed, gstep, row);
            break;
          case Variant::Mfegan:
            for (int j = 1; j <= cfg.d_steps; ++j) {
              train_step_d(res.g, res.d, opt_d, x_real, y_real, seed,
                           d_base + static_cast<std::uint64_t>(j), row);
            }
            train_step_g_evolutionary(res.g, opt_g, res.d, x_real, y_real,
                                      cfg, seed, gstep, row);
            break;
        }
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + "; " +
                           describe_last(res.trace));
      }
      if (!std::isfinite(row.loss_c) ||
          (variant != Variant::Cnn && !std::isfinite(row.loss_d))) {
        throw NumericError("training diverged: non-finite loss; " +
                           describe_last(res.trace));
      }
      res.trace.rows.push_back(row);
    }

    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - started;
    res.trace.epoch_seconds.push_back(elapsed.count());
    if (on_epoch) on_epoch(epoch, res.trace);
  }
  return res;
}

}  // namespace

TrainResult train_mfegan(const PatchSet& patches, const TrainConfig& cfg,
                         std::uint64_t seed, const EpochCallback& on_epoch) {
  return run_loop(Variant::Mfegan, patches, cfg, seed, on_epoch);
}

TrainResult train_acgan(const PatchSet& patches, const TrainConfig& cfg,
                        std::uint64_t seed, const EpochCallback& on_epoch) {
  return run_loop(Variant::Acgan, patches, cfg, seed, on_epoch);
}

TrainResult train_cnn(const PatchSet& patches, const TrainConfig& cfg,
                      std::uint64_t seed, const EpochCallback& on_epoch) {
  return run_loop(Variant::Cnn, patches, cfg, seed, on_epoch);
}

}  // namespace mfegan
