#include "failsearch/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>
#include <cstdint>
#include <limits>

namespace failsearch::kernels::omp {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 14;
}

void affine(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out) {
  assert(in.cols == weights.cols && bias.size() == weights.rows);
  out = Matrix(in.rows, weights.rows);
  const auto rows = static_cast<std::int64_t>(in.rows);
  const bool par = in.rows * weights.rows * in.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < weights.rows; ++o) {
      double s = bias[o];
      for (std::size_t k = 0; k < in.cols; ++k) s += in(r, k) * weights(o, k);
      out(r, o) = s;
    }
  }
}

void affine_backward_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_in) {
  grad_in = Matrix(grad_out.rows, weights.cols);
  const auto rows = static_cast<std::int64_t>(grad_out.rows);
  const bool par = grad_out.rows * weights.rows * weights.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < weights.cols; ++k) {
      double s = 0.0;
      for (std::size_t o = 0; o < weights.rows; ++o) s += grad_out(r, o) * weights(o, k);
      grad_in(r, k) = s;
    }
  }
}

void affine_backward_params(const Matrix& grad_out, const Matrix& in, Matrix& grad_w, std::span<double> grad_b) {
  const auto outs = static_cast<std::int64_t>(grad_out.cols);
  const bool par = grad_out.rows * grad_out.cols * in.cols >= kParallelWork;
  // Each output unit owns its row of grad_w, so there are no shared writes.
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t o = 0; o < outs; ++o) {
    double b = 0.0;
    for (std::size_t r = 0; r < grad_out.rows; ++r) b += grad_out(r, o);
    grad_b[o] += b;
    // Row-wise sweep; each sum still runs over r in ascending order.
    std::vector<double> s(in.cols, 0.0);
    for (std::size_t r = 0; r < grad_out.rows; ++r) {
      const double g = grad_out(r, o);
      const double* x = &in.data[r * in.cols];
      for (std::size_t k = 0; k < in.cols; ++k) s[k] += g * x[k];
    }
    for (std::size_t k = 0; k < in.cols; ++k) grad_w(o, k) += s[k];
  }
}

void pairwise_distances(const Matrix& points, Matrix& out) {
  out = Matrix(points.rows, points.rows);
  const auto n = static_cast<std::int64_t>(points.rows);
  const bool par = points.rows * points.rows * points.cols >= kParallelWork;
#pragma omp parallel for schedule(dynamic, 8) if (par)
  for (std::int64_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < points.rows; ++j)
      out(i, j) = static_cast<std::size_t>(i) == j ? 0.0
                                                   : std::sqrt(squared_distance(points.row(i), points.row(j)));
}

void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& sq_dist) {
  labels.assign(points.rows, 0);
  sq_dist.assign(points.rows, 0.0);
  const auto n = static_cast<std::int64_t>(points.rows);
  const bool par = points.rows * centroids.rows * points.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      const double d = squared_distance(points.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[i] = arg;
    sq_dist[i] = best;
  }
}

void silhouette_values(const Matrix& distances, std::span<const int> labels, int k, std::vector<double>& out) {
  const std::size_t n = labels.size();
  out.assign(n, 0.0);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  const auto rows = static_cast<std::int64_t>(n);
  const bool par = n * n >= kParallelWork;
#pragma omp parallel for schedule(dynamic, 16) if (par)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    if (sizes[own] < 2) continue;
    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[static_cast<std::size_t>(labels[j])] += distances(i, j);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double m = std::max(a, b);
    out[i] = m > 0.0 && std::isfinite(b) ? (b - a) / m : 0.0;
  }
}

}  // namespace failsearch::kernels::omp
