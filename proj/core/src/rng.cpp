#include "mfegan/rng.hpp"

#include <cmath>

#include "mfegan/errors.hpp"

namespace mfegan {

float Rng::normal(float mean, float stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  // Draw u1 in (0, 1] so the log is finite.
  float u1 = 0.0f;
  do {
    u1 = uniform();
  } while (u1 <= 0.0f);
  float u2 = uniform();
  const float two_pi = 6.2831853071795864769f;
  float r = std::sqrt(-2.0f * std::log(u1));
  spare_ = r * std::sin(two_pi * u2);
  have_spare_ = true;
  return mean + stddev * r * std::cos(two_pi * u2);
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ParameterError("uniform_int: hi < lo");
  std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (span == 0) return lo;  // full 64-bit span cannot occur with int bounds
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t draw = 0;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return lo + static_cast<int>(draw % span);
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t tag : path) {
    h = splitmix64(h ^ splitmix64(tag));
  }
  return h;
}

}  // namespace mfegan
