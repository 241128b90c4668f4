#include <doctest.h>

#include "failsearch/kernels.hpp"
#include "failsearch/random.hpp"

#include <cmath>

using namespace failsearch;
using namespace failsearch::kernels;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& x : m.data) x = uniform_real(rng, -2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("affine matches a hand computation") {
  Matrix in(1, 2);
  in(0, 0) = 1.0;
  in(0, 1) = 2.0;
  Matrix w(2, 2);
  w(0, 0) = 3.0;
  w(0, 1) = -1.0;
  w(1, 0) = 0.5;
  w(1, 1) = 0.25;
  std::vector<double> b{1.0, -1.0};
  Matrix out;
  serial::affine(in, w, b, out);
  CHECK(out(0, 0) == 2.0);
  CHECK(out(0, 1) == 0.0);
}

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  Rng rng(5);
  for (std::size_t rows : {1u, 7u, 300u, 2000u}) {
    auto in = random_matrix(rows, 24, rng);
    auto w = random_matrix(32, 24, rng);
    auto g = random_matrix(rows, 32, rng);
    std::vector<double> b(32);
    for (auto& x : b) x = uniform_real(rng, -1.0, 1.0);

    Matrix a, c;
    serial::affine(in, w, b, a);
    omp::affine(in, w, b, c);
    CHECK(a == c);

    serial::affine_backward_input(g, w, a);
    omp::affine_backward_input(g, w, c);
    CHECK(a == c);

    Matrix gw1(32, 24), gw2(32, 24);
    std::vector<double> gb1(32), gb2(32);
    serial::affine_backward_params(g, in, gw1, gb1);
    omp::affine_backward_params(g, in, gw2, gb2);
    CHECK(gw1 == gw2);
    CHECK(gb1 == gb2);

    auto pts = random_matrix(std::min<std::size_t>(rows, 400), 10, rng);
    serial::pairwise_distances(pts, a);
    omp::pairwise_distances(pts, c);
    CHECK(a == c);

    auto cent = random_matrix(6, 10, rng);
    std::vector<int> l1, l2;
    std::vector<double> d1, d2;
    serial::assign_nearest(pts, cent, l1, d1);
    omp::assign_nearest(pts, cent, l2, d2);
    CHECK(l1 == l2);
    CHECK(d1 == d2);
  }
}

TEST_CASE("pairwise distances are symmetric with a zero diagonal") {
  Rng rng(8);
  auto pts = random_matrix(50, 3, rng);
  Matrix d;
  pairwise_distances(pts, d);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(d(i, i) == 0.0);
    for (std::size_t j = 0; j < 50; ++j) CHECK(d(i, j) == d(j, i));
  }
  CHECK(d(0, 1) == doctest::Approx(std::sqrt(squared_distance(pts.row(0), pts.row(1)))));
}

TEST_CASE("nearest centroid ties go to the lowest index") {
  Matrix pts(1, 1, 0.0);
  Matrix cent(2, 1);
  cent(0, 0) = 1.0;
  cent(1, 0) = -1.0;
  std::vector<int> labels;
  std::vector<double> dist;
  assign_nearest(pts, cent, labels, dist);
  CHECK(labels[0] == 0);
  CHECK(dist[0] == 1.0);
}

TEST_CASE("silhouette values: serial and parallel agree bitwise") {
  Rng rng(8);
  for (std::size_t n : {5u, 200u, 900u}) {
    const auto pts = random_matrix(n, 3, rng);
    Matrix d;
    serial::pairwise_distances(pts, d);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(uniform_int(rng, 0, 3));
    std::vector<double> a, b;
    serial::silhouette_values(d, labels, 4, a);
    omp::silhouette_values(d, labels, 4, b);
    CHECK(a == b);
  }
}

TEST_CASE("silhouette values on a hand case") {
  // Points 0, 1 on a line and 10 alone.
  Matrix pts(3, 1);
  pts(0, 0) = 0.0;
  pts(1, 0) = 1.0;
  pts(2, 0) = 10.0;
  Matrix d;
  serial::pairwise_distances(pts, d);
  std::vector<int> labels{0, 0, 1};
  std::vector<double> s;
  serial::silhouette_values(d, labels, 2, s);
  CHECK(s[0] == doctest::Approx((10.0 - 1.0) / 10.0));
  CHECK(s[1] == doctest::Approx((9.0 - 1.0) / 9.0));
  CHECK(s[2] == 0.0);
}
