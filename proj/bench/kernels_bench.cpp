// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to vary the team.

#include "failsearch/kernels.hpp"
#include "failsearch/random.hpp"

#include <benchmark/benchmark.h>

using namespace failsearch;
using kernels::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.data) v = uniform_real(rng, -1.0, 1.0);
  return m;
}

template <auto Kernel>
void affine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = random_matrix(n, 64, 1), w = random_matrix(64, 64, 2);
  std::vector<double> bias(64, 0.1);
  Matrix out;
  for (auto _ : state) {
    Kernel(in, w, bias, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <auto Kernel>
void backward_params(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto grad = random_matrix(n, 64, 3), in = random_matrix(n, 64, 4);
  Matrix gw(64, 64);
  std::vector<double> gb(64);
  for (auto _ : state) {
    Kernel(grad, in, gw, gb);
    benchmark::DoNotOptimize(gw.data.data());
  }
}

template <auto Kernel>
void distances(benchmark::State& state) {
  const auto pts = random_matrix(static_cast<std::size_t>(state.range(0)), 24, 5);
  Matrix out;
  for (auto _ : state) {
    Kernel(pts, out);
    benchmark::DoNotOptimize(out.data.data());
  }
}

template <auto Kernel>
void nearest(benchmark::State& state) {
  const auto pts = random_matrix(static_cast<std::size_t>(state.range(0)), 24, 6);
  const auto centroids = random_matrix(20, 24, 7);
  std::vector<int> labels;
  std::vector<double> d;
  for (auto _ : state) {
    Kernel(pts, centroids, labels, d);
    benchmark::DoNotOptimize(labels.data());
  }
}

template <auto Kernel>
void silhouette(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = random_matrix(n, 24, 8);
  Matrix dist;
  kernels::serial::pairwise_distances(pts, dist);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 8);
  std::vector<double> out;
  for (auto _ : state) {
    Kernel(dist, labels, 8, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(affine<kernels::serial::affine>)->Name("affine/serial")->Arg(256)->Arg(4096);
BENCHMARK(affine<kernels::omp::affine>)->Name("affine/omp")->Arg(256)->Arg(4096);
BENCHMARK(backward_params<kernels::serial::affine_backward_params>)->Name("backward_params/serial")->Arg(4096);
BENCHMARK(backward_params<kernels::omp::affine_backward_params>)->Name("backward_params/omp")->Arg(4096);
BENCHMARK(distances<kernels::serial::pairwise_distances>)->Name("pairwise_distances/serial")->Arg(500)->Arg(2000);
BENCHMARK(distances<kernels::omp::pairwise_distances>)->Name("pairwise_distances/omp")->Arg(500)->Arg(2000);
BENCHMARK(nearest<kernels::serial::assign_nearest>)->Name("assign_nearest/serial")->Arg(20000);
BENCHMARK(nearest<kernels::omp::assign_nearest>)->Name("assign_nearest/omp")->Arg(20000);
BENCHMARK(silhouette<kernels::serial::silhouette_values>)->Name("silhouette/serial")->Arg(2000);
BENCHMARK(silhouette<kernels::omp::silhouette_values>)->Name("silhouette/omp")->Arg(2000);

BENCHMARK_MAIN();
