#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace modlab {

// Uniform index in [0, n) by rejection on raw 64-bit draws. Unlike
// std::uniform_int_distribution the stream is the same on every standard
// library, which keeps seeded results bit-reproducible across toolchains.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  constexpr std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace modlab
