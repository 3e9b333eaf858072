#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace wavefuse {

/// Counter-based generator: draw i of stream (seed) is
///   splitmix64_finalize(seed * 0x9E3779B97F4A7C15 + (i + 1) * 0xD1B54A32D192ED03)
/// so every value is a pure function of (seed, i). Floating draws take the top
/// 53 bits; normals use Box-Muller on two consecutive uniforms. Nothing here
/// depends on standard-library distributions, whose output is
/// implementation-defined.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_finalize(std::uint64_t z);

/// Derives an independent child seed, e.g. per scene or per corruption cell.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

/// Fisher-Yates driven by `rng`; identical sequence for identical seed.
template <typename T>
void shuffle(std::span<T> values, CounterRng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = rng.index(i);
    T tmp = values[i - 1];
    values[i - 1] = values[j];
    values[j] = tmp;
  }
}

}  // namespace wavefuse
