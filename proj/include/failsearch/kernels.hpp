#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Dense data-parallel kernels. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both compute each output element with the
// same loop order, so their results are bitwise identical; tests hold them to
// that and bench/ compares their speed.
namespace failsearch::kernels {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

namespace serial {

// out = in * weights^T + bias, weights is (out_features x in_features).
void affine(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out);

// grad_in = grad_out * weights
void affine_backward_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_in);

// grad_w += grad_out^T * in, grad_b += column sums of grad_out
void affine_backward_params(const Matrix& grad_out, const Matrix& in, Matrix& grad_w, std::span<double> grad_b);

// Symmetric matrix of Euclidean distances between rows.
void pairwise_distances(const Matrix& points, Matrix& out);

// Nearest centroid per row (lowest index on ties) and its squared distance.
void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& sq_dist);

// Per-point silhouette (b - a) / max(a, b) from a distance matrix and labels
// in [0, k). Points alone in their cluster get 0.
void silhouette_values(const Matrix& distances, std::span<const int> labels, int k, std::vector<double>& out);

}  // namespace serial

namespace omp {

void affine(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out);
void affine_backward_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_in);
void affine_backward_params(const Matrix& grad_out, const Matrix& in, Matrix& grad_w, std::span<double> grad_b);
void pairwise_distances(const Matrix& points, Matrix& out);
void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& sq_dist);
void silhouette_values(const Matrix& distances, std::span<const int> labels, int k, std::vector<double>& out);

}  // namespace omp

// Default entry points used by the library.
using omp::affine;
using omp::affine_backward_input;
using omp::affine_backward_params;
using omp::assign_nearest;
using omp::pairwise_distances;
using omp::silhouette_values;

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace failsearch::kernels
