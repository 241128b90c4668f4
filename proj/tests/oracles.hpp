#pragma once

// Brute-force reference computations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace oracles {

// U of the first sample by pair counting.
inline double pair_u(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

// Two-sided permutation p-value by listing every way of drawing |a| values
// from the pooled sample.
inline double enumerated_mwu_p(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = a.size(), total = pooled.size();
  const double observed = pair_u(a, b);
  double lo = 0, hi = 0, count = 0;
  for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < total; ++i) ((mask >> i) & 1u ? x : y).push_back(pooled[i]);
    const double u = pair_u(x, y);
    count += 1;
    if (u <= observed + 1e-9) lo += 1;
    if (u >= observed - 1e-9) hi += 1;
  }
  return std::min(1.0, 2.0 * std::min(lo, hi) / count);
}

// Cluster histogram of a subset given 1-based labels.
inline std::vector<std::size_t> histogram(std::span<const int> labels, int k, std::span<const std::size_t> subset) {
  std::vector<std::size_t> f(static_cast<std::size_t>(k), 0);
  for (auto i : subset) ++f[static_cast<std::size_t>(labels[i] - 1)];
  return f;
}

inline double coverage(std::span<const int> labels, int k, std::span<const std::size_t> subset) {
  const auto f = histogram(labels, k, subset);
  double hit = 0;
  for (auto c : f) hit += c > 0 ? 1 : 0;
  return hit / k;
}

inline double entropy_normalized(std::span<const int> labels, int k, std::span<const std::size_t> subset) {
  const auto f = histogram(labels, k, subset);
  double sum = 0;
  for (auto c : f) sum += static_cast<double>(c);
  double h = 0;
  for (auto c : f) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / sum;
    h -= p * std::log2(p);
  }
  return k < 2 ? 0.0 : h / std::log2(static_cast<double>(k));
}

}  // namespace oracles
