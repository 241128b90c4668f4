#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace failsearch {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent child streams from a
// master seed so that parallel work does not depend on scheduling order.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

inline Rng derive_rng(std::uint64_t master, std::uint64_t index) {
  return Rng{derive_seed(master, index)};
}

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>{lo, hi}(rng);
}

// Uniform on [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>{lo, hi}(rng);
}

// Uniform on [lo, hi]; the closed end matters only as a representable value.
inline double uniform_real_closed(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>{lo, std::nextafter(hi, hi + 1.0)}(rng);
}

inline bool coin(Rng& rng) { return (rng() >> 63) != 0; }

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng, 0.0, 1.0) < p; }

}  // namespace failsearch
