#include "failsearch/analysis.hpp"
#include "failsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace failsearch::analysis {

namespace {

constexpr std::size_t kExactLimit = 400;

struct Ranked {
  std::vector<double> ranks;  // midranks, pooled order a then b
  double tie_term = 0.0;      // sum of t^3 - t over tie groups
};

Ranked midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  Ranked r;
  r.ranks.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r.ranks[order[t]] = mid;
    const double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

void check_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("statistical test needs two non-empty samples");
  for (double x : a)
    if (std::isnan(x)) throw ValidationError("sample contains NaN");
  for (double x : b)
    if (std::isnan(x)) throw ValidationError("sample contains NaN");
}

// Permutation distribution of the first sample's doubled rank sum, given the
// pooled midranks. Doubling makes every midrank an integer.
double exact_p(const Ranked& r, std::size_t n, long observed2) {
  std::vector<long> twice(r.ranks.size());
  long top = 0;
  for (std::size_t i = 0; i < r.ranks.size(); ++i) {
    twice[i] = std::lround(2.0 * r.ranks[i]);
    top += twice[i];
  }
  const std::size_t width = static_cast<std::size_t>(top) + 1;
  std::vector<double> ways((n + 1) * width, 0.0);
  ways[0] = 1.0;
  std::size_t used = 0;
  for (long v : twice) {
    ++used;
    for (std::size_t j = std::min(used, n); j >= 1; --j) {
      double* dst = &ways[j * width];
      const double* src = &ways[(j - 1) * width];
      for (std::size_t s = width; s-- > static_cast<std::size_t>(v);) dst[s] += src[s - static_cast<std::size_t>(v)];
    }
  }
  double total = 0.0, lo = 0.0, hi = 0.0;
  const double* row = &ways[n * width];
  for (std::size_t s = 0; s < width; ++s) {
    total += row[s];
    if (static_cast<long>(s) <= observed2) lo += row[s];
    if (static_cast<long>(s) >= observed2) hi += row[s];
  }
  return std::min(1.0, 2.0 * std::min(lo, hi) / total);
}

}  // namespace

MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MwuMethod method) {
  check_samples(a, b);
  const auto r = midranks(a, b);
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rank_sum += r.ranks[i];
  MwuResult out;
  out.u = rank_sum - n * (n + 1.0) / 2.0;

  const bool exact = method == MwuMethod::Exact ||
                     (method == MwuMethod::Auto && a.size() * b.size() <= kExactLimit);
  if (exact) {
    out.exact = true;
    // The two-sided p is symmetric in the samples; enumerate over the smaller.
    if (a.size() <= b.size()) {
      out.p_value = exact_p(r, a.size(), std::lround(2.0 * rank_sum));
    } else {
      const double total = (n + m) * (n + m + 1.0) / 2.0;
      Ranked swapped;
      swapped.ranks.assign(r.ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), r.ranks.end());
      swapped.ranks.insert(swapped.ranks.end(), r.ranks.begin(),
                           r.ranks.begin() + static_cast<std::ptrdiff_t>(a.size()));
      out.p_value = exact_p(swapped, b.size(), std::lround(2.0 * (total - rank_sum)));
    }
    return out;
  }
  const double big_n = n + m;
  const double var = n * m / 12.0 * ((big_n + 1.0) - r.tie_term / (big_n * (big_n - 1.0)));
  if (!(var > 0.0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.u - n * m / 2.0) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

double vargha_delaney_a12(std::span<const double> a, std::span<const double> b) {
  check_samples(a, b);
  double wins = 0.0;
  for (double x : a)
    for (double y : b) wins += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

EffectSize effect_size(double a12) {
  const double d = std::abs(a12 - 0.5) + 0.5;
  if (d < 0.56) return EffectSize::Negligible;
  if (d < 0.64) return EffectSize::Small;
  if (d < 0.71) return EffectSize::Medium;
  return EffectSize::Large;
}

const char* to_string(EffectSize e) noexcept {
  switch (e) {
    case EffectSize::Negligible: return "negligible";
    case EffectSize::Small: return "small";
    case EffectSize::Medium: return "medium";
    case EffectSize::Large: return "large";
  }
  return "?";
}

}  // namespace failsearch::analysis
