#pragma once

#include "failsearch/executor.hpp"
#include "failsearch/kernels.hpp"
#include "failsearch/random.hpp"

#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace failsearch::analysis {

using kernels::Matrix;

// ---- trajectories -----------------------------------------------------------

// One row per trajectory: samples interleaved (t0 c0, t0 c1, t1 c0, ...) and
// zero-padded to the longest trajectory.
Matrix pad_trajectories(std::span<const exec::Trajectory> trajectories);

// ---- clustering -------------------------------------------------------------

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-8;  // max centroid shift
};

struct KMeansResult {
  std::vector<int> labels;  // 0-based
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;  // of the winning restart
};

// k-means++ seeding and Lloyd iterations, best inertia over the restarts.
KMeansResult kmeans(const Matrix& points, int k, Rng& rng, const KMeansOptions& options = {});

// Mean silhouette; needs at least two non-empty clusters.
double silhouette(const Matrix& points, std::span<const int> labels);
double silhouette_from_distances(const Matrix& distances, std::span<const int> labels);

struct ClusterModel {
  Matrix points;                         // distinct input points
  std::vector<std::size_t> distinct_of;  // input index -> row of `points`
  int k_star = 0;
  std::vector<int> labels;  // per input point, 1..k_star
  Matrix centroids;
  std::map<int, double> silhouette_by_k;
  int restarts = 0;

  // Number of points of `subset` (input indices) in each cluster.
  std::vector<std::size_t> counts(std::span<const std::size_t> subset) const;
};

struct SelectKOptions {
  int k_min = 2;
  int k_max = 0;  // 0: min(distinct points, 30)
  double improvement = 0.2;
  KMeansOptions kmeans;
};

// Sweeps k upward and adopts a larger k only when its silhouette beats the
// best so far by the improvement ratio. Duplicates are collapsed first, so k*
// never exceeds the number of distinct points.
ClusterModel select_k(const Matrix& points, Rng& rng, const SelectKOptions& options = {});

// Share of clusters holding at least one point of the subset.
double coverage(const ClusterModel& model, std::span<const std::size_t> subset);

// Shannon entropy (bits) of the subset's cluster histogram over log2(k*).
double entropy_normalized(const ClusterModel& model, std::span<const std::size_t> subset);
double entropy_normalized(std::span<const std::size_t> counts);

// ---- statistics ---------------------------------------------------------------

enum class MwuMethod { Auto, Exact, Normal };

struct MwuResult {
  double u = 0.0;  // U of the first sample: #(a > b) + ties / 2
  double p_value = 1.0;
  bool exact = false;
};

// Two-sided. Auto takes the exact permutation distribution when n*m <= 400.
MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MwuMethod method = MwuMethod::Auto);

double vargha_delaney_a12(std::span<const double> a, std::span<const double> b);

enum class EffectSize { Negligible, Small, Medium, Large };
EffectSize effect_size(double a12);
const char* to_string(EffectSize e) noexcept;

// ---- diversity report -------------------------------------------------------

// Failures observed in one repetition of one approach: the encoded
// configuration and one trajectory per failing configuration.
struct RepetitionFailures {
  std::size_t executed = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<exec::Trajectory> outputs;
};

struct ApproachData {
  std::string name;
  std::vector<RepetitionFailures> repetitions;
};

struct ApproachSummary {
  std::string name;
  std::vector<double> failures;  // per repetition
  std::vector<double> input_coverage, input_entropy, output_coverage, output_entropy;

  static double mean(const std::vector<double>& xs);
};

struct PairwiseComparison {
  std::string first, second, metric;
  std::optional<double> p_value;
  std::optional<double> a12;
};

struct DiversityReport {
  std::vector<ApproachSummary> approaches;
  std::vector<PairwiseComparison> pairwise;
  int clustering_runs = 0;
  bool diversity_available = false;
  std::vector<int> input_k_star, output_k_star;  // per clustering run

  nlohmann::json to_json() const;
  static DiversityReport from_json(const nlohmann::json& doc);
  std::string to_csv() const;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"failures", "input_coverage", "input_entropy", "output_coverage",
                                              "output_entropy"};
  return names;
}

struct ReportOptions {
  int clustering_runs = 10;
  SelectKOptions select;
};

// Pools every failure across approaches and repetitions into one input and
// one output clustering per run, then scores each repetition against them.
DiversityReport build_diversity_report(std::span<const ApproachData> approaches, std::uint64_t seed,
                                       const ReportOptions& options = {});

}  // namespace failsearch::analysis
