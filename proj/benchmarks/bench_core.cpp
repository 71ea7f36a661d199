#include <benchmark/benchmark.h>

#include <vector>

#include "mfegan/evaluation.hpp"
#include "mfegan/hsi.hpp"
#include "mfegan/networks.hpp"
#include "mfegan/ops.hpp"
#include "mfegan/optim.hpp"
#include "mfegan/rng.hpp"
#include "mfegan/tensor.hpp"

namespace {

using namespace mfegan;

Tensor rand_tensor(Shape shape, Rng& rng, bool rg) {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<float> v(n);
  for (float& x : v) x = rng.uniform(-1.0f, 1.0f);
  return Tensor::from(shape, std::move(v), rg);
}

// First discriminator stage at full width: [B,3,20,20] * [128,3,4,4], s2 p1.
void BM_conv2d_forward(benchmark::State& state) {
  Rng rng(1);
  const Tensor x = rand_tensor({16, 3, 20, 20}, rng, false);
  const Tensor k = rand_tensor({128, 3, 4, 4}, rng, false);
  NoGradScope no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ops::conv2d(x, k, 2, 1));
  }
}
BENCHMARK(BM_conv2d_forward)->Unit(benchmark::kMicrosecond);

void BM_conv2d_train(benchmark::State& state) {
  Rng rng(2);
  Tensor x = rand_tensor({16, 3, 20, 20}, rng, false);
  Tensor k = rand_tensor({128, 3, 4, 4}, rng, true);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = ops::mean_all(ops::square(ops::conv2d(x, k, 2, 1)));
    tape.backward(loss);
    benchmark::DoNotOptimize(k.impl());
  }
}
BENCHMARK(BM_conv2d_train)->Unit(benchmark::kMicrosecond);

// Innermost deconvolution of the generator: [B,512,1,1] -> [B,256,5,5].
void BM_deconv2d_forward(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = rand_tensor({16, 512, 1, 1}, rng, false);
  const Tensor k = rand_tensor({512, 256, 5, 5}, rng, false);
  NoGradScope no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ops::deconv2d(x, k, 1, 0));
  }
}
BENCHMARK(BM_deconv2d_forward)->Unit(benchmark::kMicrosecond);

void BM_linear_forward(benchmark::State& state) {
  Rng rng(4);
  const Tensor x = rand_tensor({64, 512}, rng, false);
  const Tensor w = rand_tensor({512, 512}, rng, false);
  const Tensor b = rand_tensor({512}, rng, false);
  NoGradScope no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ops::linear(x, w, b));
  }
}
BENCHMARK(BM_linear_forward)->Unit(benchmark::kMicrosecond);

// Full-width discriminator forward in eval mode, the per-pixel cost of
// classifying a whole scene.
void BM_discriminator_eval(benchmark::State& state) {
  Discriminator d = build_discriminator(20, 4, 7);
  Rng rng(8);
  const Tensor x = rand_tensor({16, 3, 20, 20}, rng, false);
  NoGradScope no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(discriminate(d, x, false, false, nullptr));
  }
}
BENCHMARK(BM_discriminator_eval)->Unit(benchmark::kMillisecond);

// One discriminator optimization step (forward + backward + Adam) on a
// real/fake pair, the dominant cost of every GAN epoch.
void BM_discriminator_step(benchmark::State& state) {
  Generator g = build_generator(20, 4, 11);
  Discriminator d = build_discriminator(20, 4, 12);
  Adam opt(d.parameters(), {});
  Rng rng(13);
  const Tensor x_real = rand_tensor({8, 3, 20, 20}, rng, false);
  const std::vector<int> y = sample_labels(8, 4, rng);
  for (auto _ : state) {
    Tensor x_fake;
    {
      NoGradScope no_grad;
      Rng zrng(14);
      x_fake = generate(g, latent_input(y, 4, zrng), true, false);
    }
    Tape tape;
    TapeScope scope(tape);
    Rng drop(15);
    const DiscOut real = discriminate(d, x_real, true, true, &drop);
    const DiscOut fake = discriminate(d, x_fake, true, true, &drop);
    const std::vector<int> targets = {0, 1, 2, 3, 0, 1, 2, 3};
    const Tensor loss =
        ops::add(ops::mean_all(real.source_prob),
                 ops::add(ops::nll(real.class_logprob, targets),
                          ops::mean_all(fake.source_prob)));
    tape.backward(loss);
    opt.step();
  }
}
BENCHMARK(BM_discriminator_step)->Unit(benchmark::kMillisecond);

void BM_knn_query(benchmark::State& state) {
  SyntheticSpec spec;
  spec.n_classes = 3;
  spec.class_sizes = {150, 100, 50};
  spec.bands = 3;
  spec.height = 24;
  spec.width = 24;
  const SyntheticScene scene = synth_cube(spec, 21);
  const PatchSet all = extract_patches(scene.cube, scene.raster, 8);
  const SplitSpec split = stratified_split(all, 0.5, 21, {});
  const PatchSet train = subset(all, split.train);
  const PatchSet queries = subset(all, split.test);
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn_classify(train, queries, 5));
  }
}
BENCHMARK(BM_knn_query)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
