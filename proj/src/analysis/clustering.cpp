#include "failsearch/analysis.hpp"
#include "failsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace failsearch::analysis {

Matrix pad_trajectories(std::span<const exec::Trajectory> trajectories) {
  if (trajectories.empty()) throw ValidationError("no trajectories to pad");
  const std::size_t width = trajectories.front().width();
  std::size_t longest = 0;
  for (const auto& t : trajectories) {
    t.check();
    if (t.width() != width) throw ValidationError("trajectories differ in sample width");
    longest = std::max(longest, t.steps());
  }
  Matrix out(trajectories.size(), longest * width);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& s = trajectories[i].samples;
    for (std::size_t t = 0; t < s.size(); ++t)
      for (std::size_t c = 0; c < width; ++c) out(i, t * width + c) = s[t][c];
  }
  return out;
}

namespace {

Matrix seed_plus_plus(const Matrix& pts, int k, Rng& rng) {
  const std::size_t n = pts.rows;
  Matrix c(static_cast<std::size_t>(k), pts.cols);
  auto copy_row = [&](std::size_t dst, std::size_t src) {
    std::copy(pts.row(src).begin(), pts.row(src).end(), c.row(dst).begin());
  };
  copy_row(0, static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], kernels::squared_distance(pts.row(i), c.row(static_cast<std::size_t>(j - 1))));
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double r = uniform_real(rng, 0.0, total);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
      // Rounding can leave r past the last partial sum.
      while (d2[pick] <= 0.0 && pick > 0) --pick;
    } else {
      pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1));
    }
    copy_row(static_cast<std::size_t>(j), pick);
  }
  return c;
}

// Moves the worst-fitting point of a multi-member cluster into each empty one.
void repair_empty(std::vector<int>& labels, std::vector<double>& sq, int k) {
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  for (int c = 0; c < k; ++c) {
    if (size[static_cast<std::size_t>(c)] > 0) continue;
    std::size_t far = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (size[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (far == labels.size() || sq[i] > sq[far]) far = i;
    }
    --size[static_cast<std::size_t>(labels[far])];
    labels[far] = c;
    sq[far] = 0.0;
    size[static_cast<std::size_t>(c)] = 1;
  }
}

Matrix means(const Matrix& pts, const std::vector<int>& labels, int k) {
  Matrix c(static_cast<std::size_t>(k), pts.cols);
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < pts.rows; ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    ++size[l];
    for (std::size_t d = 0; d < pts.cols; ++d) c(l, d) += pts(i, d);
  }
  for (std::size_t l = 0; l < c.rows; ++l)
    for (std::size_t d = 0; d < pts.cols; ++d) c(l, d) /= static_cast<double>(size[l]);
  return c;
}

KMeansResult lloyd(const Matrix& pts, int k, Rng& rng, const KMeansOptions& opt) {
  KMeansResult r;
  r.centroids = seed_plus_plus(pts, k, rng);
  std::vector<double> sq;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    r.iterations = it;
    kernels::assign_nearest(pts, r.centroids, r.labels, sq);
    repair_empty(r.labels, sq, k);
    auto next = means(pts, r.labels, k);
    double shift = 0.0;
    for (std::size_t c = 0; c < next.rows; ++c)
      shift = std::max(shift, std::sqrt(kernels::squared_distance(next.row(c), r.centroids.row(c))));
    r.centroids = std::move(next);
    if (shift < opt.tolerance) break;
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < pts.rows; ++i)
    r.inertia += kernels::squared_distance(pts.row(i), r.centroids.row(static_cast<std::size_t>(r.labels[i])));
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, Rng& rng, const KMeansOptions& options) {
  if (k < 1 || static_cast<std::size_t>(k) > points.rows)
    throw ValidationError("k must lie in [1, " + std::to_string(points.rows) + "], got " + std::to_string(k));
  if (options.restarts < 1 || options.max_iterations < 1) throw ValidationError("k-means needs restarts and iterations");
  const std::uint64_t base = rng();
  const int restarts = options.restarts;
  std::vector<KMeansResult> runs(static_cast<std::size_t>(restarts));
  const bool par = points.rows * points.cols * static_cast<std::size_t>(k) >= (1u << 14);
#pragma omp parallel for schedule(dynamic, 1) if (par)
  for (int r = 0; r < restarts; ++r) {
    Rng local = derive_rng(base, static_cast<std::uint64_t>(r));
    runs[static_cast<std::size_t>(r)] = lloyd(points, k, local, options);
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;
  return std::move(runs[best]);
}

double silhouette_from_distances(const Matrix& distances, std::span<const int> labels) {
  if (labels.empty() || distances.rows != labels.size()) throw ValidationError("silhouette: labels do not match points");
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) {
    if (l < 0) throw ValidationError("silhouette: negative label");
    ++size[static_cast<std::size_t>(l)];
  }
  if (std::count_if(size.begin(), size.end(), [](std::size_t s) { return s > 0; }) < 2)
    throw ValidationError("silhouette needs at least two clusters");
  std::vector<double> s;
  kernels::silhouette_values(distances, labels, k, s);
  double sum = 0.0;
  for (double v : s) sum += v;
  return sum / static_cast<double>(s.size());
}

double silhouette(const Matrix& points, std::span<const int> labels) {
  Matrix d;
  kernels::pairwise_distances(points, d);
  return silhouette_from_distances(d, labels);
}

std::vector<std::size_t> ClusterModel::counts(std::span<const std::size_t> subset) const {
  std::vector<std::size_t> c(static_cast<std::size_t>(k_star), 0);
  for (auto i : subset) {
    if (i >= labels.size()) throw ValidationError("subset index outside the clustered points");
    ++c[static_cast<std::size_t>(labels[i] - 1)];
  }
  return c;
}

ClusterModel select_k(const Matrix& points, Rng& rng, const SelectKOptions& options) {
  if (points.rows < 2) throw DegenerateData("clustering needs at least two points");
  ClusterModel m;
  m.restarts = options.kmeans.restarts;

  // Collapse duplicates, keeping first-appearance order.
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<std::size_t> first_row;
  m.distinct_of.resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    std::vector<double> key(points.row(i).begin(), points.row(i).end());
    auto [it, fresh] = seen.try_emplace(std::move(key), first_row.size());
    if (fresh) first_row.push_back(i);
    m.distinct_of[i] = it->second;
  }
  m.points = Matrix(first_row.size(), points.cols);
  for (std::size_t d = 0; d < first_row.size(); ++d)
    std::copy(points.row(first_row[d]).begin(), points.row(first_row[d]).end(), m.points.row(d).begin());
  const int distinct = static_cast<int>(first_row.size());

  std::vector<int> chosen(static_cast<std::size_t>(distinct), 0);
  if (distinct == 1) {
    m.k_star = 1;
    m.centroids = m.points;
  } else {
    const int k_max = std::min(distinct, options.k_max > 0 ? options.k_max : 30);
    const int k_min = std::clamp(options.k_min, 2, k_max);
    Matrix dist;
    kernels::pairwise_distances(m.points, dist);
    double best = 0.0;
    for (int k = k_min; k <= k_max; ++k) {
      auto fit = kmeans(m.points, k, rng, options.kmeans);
      const double s = silhouette_from_distances(dist, fit.labels);
      m.silhouette_by_k[k] = s;
      if (k == k_min || s >= best + options.improvement * std::abs(best)) {
        best = s;
        m.k_star = k;
        chosen = std::move(fit.labels);
        m.centroids = std::move(fit.centroids);
      }
    }
  }

  // Number clusters 1..k* by first appearance so labels do not depend on
  // the order k-means happened to produce.
  std::vector<int> rename(static_cast<std::size_t>(m.k_star), 0);
  int next = 0;
  m.labels.resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    auto& r = rename[static_cast<std::size_t>(chosen[m.distinct_of[i]])];
    if (r == 0) r = ++next;
    m.labels[i] = r;
  }
  Matrix reordered(m.centroids.rows, m.centroids.cols);
  for (std::size_t c = 0; c < rename.size(); ++c)
    std::copy(m.centroids.row(c).begin(), m.centroids.row(c).end(),
              reordered.row(static_cast<std::size_t>(rename[c] - 1)).begin());
  m.centroids = std::move(reordered);
  return m;
}

double entropy_normalized(std::span<const std::size_t> counts) {
  std::size_t total = 0, nonzero = 0, first = 0;
  bool uniform = true;
  for (auto c : counts) {
    if (c == 0) continue;
    if (nonzero == 0) first = c;
    uniform = uniform && c == first;
    total += c;
    ++nonzero;
  }
  if (total == 0) throw ValidationError("entropy of an empty subset");
  if (counts.size() < 2) return 0.0;
  double h = 0.0;
  if (uniform) {
    h = std::log2(static_cast<double>(nonzero));
  } else {
    for (auto c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(total);
      h -= p * std::log2(p);
    }
  }
  return std::clamp(h / std::log2(static_cast<double>(counts.size())), 0.0, 1.0);
}

double entropy_normalized(const ClusterModel& model, std::span<const std::size_t> subset) {
  const auto c = model.counts(subset);
  return entropy_normalized(c);
}

double coverage(const ClusterModel& model, std::span<const std::size_t> subset) {
  const auto c = model.counts(subset);
  const auto hit = std::count_if(c.begin(), c.end(), [](std::size_t x) { return x > 0; });
  return static_cast<double>(hit) / static_cast<double>(model.k_star);
}

}  // namespace failsearch::analysis
