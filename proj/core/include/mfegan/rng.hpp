#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mfegan {

// Deterministic random source.  The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); all distributions are implemented here
// by hand so that streams are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).  24 random bits -> exactly representable floats.
  float uniform() {
    return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
  }

  // Uniform in [lo, hi).
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Standard Box-Muller with the usual cached second draw.
  float normal(float mean, float stddev);

  // Uniform integer in [lo, hi], inclusive, via rejection sampling (no
  // modulo bias).
  int uniform_int(int lo, int hi);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(0, i);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

// Derives an independent child seed from a base seed and a path of tags
// (phase id, step counter, ...) by splitmix64-style mixing.
// The same (base, path) pair always yields the same seed; distinct paths
// yield decorrelated streams.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

// Stream tags used when deriving per-purpose seeds.  Values are part of the
// reproducibility contract: changing them changes every derived stream.
namespace stream {
inline constexpr std::uint64_t kInitG = 0x11;
inline constexpr std::uint64_t kInitD = 0x12;
inline constexpr std::uint64_t kEpochShuffle = 0x21;
inline constexpr std::uint64_t kDStepLatent = 0x31;
inline constexpr std::uint64_t kDStepDropout = 0x32;
inline constexpr std::uint64_t kGUpdateLatent = 0x41;
inline constexpr std::uint64_t kGUpdateDropout = 0x42;
inline constexpr std::uint64_t kFitnessLatent = 0x43;
inline constexpr std::uint64_t kFitnessDropout = 0x44;
inline constexpr std::uint64_t kSplit = 0x51;
inline constexpr std::uint64_t kOversample = 0x52;
inline constexpr std::uint64_t kSynthNoise = 0x61;
inline constexpr std::uint64_t kSynthLayout = 0x62;
}  // namespace stream

}  // namespace mfegan
