#pragma once

// Counter-based random numbers: every draw is a pure function of
// (key, counter), so sampling is independent of evaluation order and
// thread count.

#include <cmath>
#include <cstdint>

#include "nvrot/constants.hpp"

namespace nvrot::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 64 random bits for (key, counter).
constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
  return splitmix64(splitmix64(key) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double uniform(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(bits(key, counter) >> 11) * 0x1.0p-53;
}

/// Standard normal draw via Box-Muller on two consecutive counters.
inline double normal(std::uint64_t key, std::uint64_t counter) {
  const double u1 = 1.0 - uniform(key, 2 * counter);  // (0, 1]
  const double u2 = uniform(key, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(units::kTwoPi * u2);
}

/// Derive an independent key for a named sub-stream.
constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t stream) {
  return splitmix64(key ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL));
}

}  // namespace nvrot::rng
