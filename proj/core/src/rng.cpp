#include "wavefuse/rng.hpp"

#include <cmath>
#include <numbers>

namespace wavefuse {

std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return splitmix64_finalize(parent ^ splitmix64_finalize(tag + 0x632BE59BD9B4E019ULL));
}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return splitmix64_finalize(seed_ * 0x9E3779B97F4A7C15ULL + counter_ * 0xD1B54A32D192ED03ULL);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t CounterRng::index(std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

double CounterRng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace wavefuse
