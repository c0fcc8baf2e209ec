#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace archspace {

/// Engine used by every sampler. mt19937_64 output is fixed by the standard;
/// the helpers below avoid std distributions, whose output differs between
/// standard library implementations.
using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection. n must be >= 1.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace archspace
