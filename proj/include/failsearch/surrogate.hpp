#pragma once

#include "failsearch/config/operators.hpp"
#include "failsearch/dataset.hpp"
#include "failsearch/kernels.hpp"

#include <filesystem>
#include <json.hpp>
#include <span>
#include <vector>

namespace failsearch::surrogate {

using kernels::Matrix;

struct Architecture {
  std::size_t input_width = 0;
  int hidden_layers = 2;
  std::size_t hidden_units = 32;
  double dropout = 0.5;
  bool batchnorm = true;

  // A single hidden layer trains without dropout.
  double effective_dropout() const noexcept { return hidden_layers == 1 ? 0.0 : dropout; }
  void check() const;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  int epochs = 200;
  std::size_t batch_size = 64;
  data::ClassWeights weights;
  std::uint64_t seed = 0;
  int patience = 20;
};

struct HiddenLayer {
  Matrix weight;  // units x inputs
  std::vector<double> bias;
  std::vector<double> gamma, beta;                // batchnorm scale/shift
  std::vector<double> running_mean, running_var;  // batchnorm inference statistics
};

struct TrainingInfo {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // per epoch, train-mode running mean
  std::vector<double> val_loss;    // index 0 is the initialized model
};

// Trained classifier f: E -> [0, 1]. Immutable after training; queries are
// read-only and may run concurrently.
class Model {
public:
  Architecture arch;
  std::vector<double> input_mean, input_scale;  // standardization applied to raw features
  std::vector<HiddenLayer> hidden;
  Matrix out_weight;  // 2 x units
  std::vector<double> out_bias;
  TrainingInfo info;

  // Fresh He-uniform initialization.
  static Model initialize(const Architecture& arch, Rng& rng);

  // Probability of the failure class.
  double predict(std::span<const double> features) const;
  std::vector<double> predict_batch(const Matrix& features) const;
  // Both class probabilities (p0, p1).
  std::pair<double, double> probabilities(std::span<const double> features) const;
  // d p1 / d feature, inference mode, with respect to raw (unstandardized) features.
  std::vector<double> saliency(std::span<const double> features) const;

  // Weighted cross-entropy, inference mode, normalized by the summed weights.
  double loss(const Matrix& features, const std::vector<int>& labels, const data::ClassWeights& w) const;

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

private:
  void check_width(std::size_t w) const;
  Matrix forward_inference(const Matrix& x) const;  // logits
};

Matrix features_of(const data::InteractionDataset& d);

Model train(const data::InteractionDataset& train_set, const data::InteractionDataset& val_set,
            const Architecture& arch, const TrainingConfig& cfg);
Model train(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_val,
            const std::vector<int>& y_val, const Architecture& arch, const TrainingConfig& cfg);

double predict_failure(const Model& model, std::span<const double> features);
std::vector<double> saliency(const Model& model, std::span<const double> features);

// Feature with the largest |gradient| (lowest index on ties) mapped to its
// owning parameter; direction is the gradient's sign (zero counts as +).
config::DirectedMove saliency_to_parameter(std::span<const double> gradient, const config::ConfigSchema& schema);

struct ClassifierMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

ClassifierMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn = 0);
ClassifierMetrics precision_recall(const Model& model, const data::InteractionDataset& test_set,
                                   double threshold = 0.5);

struct Candidate {
  double precision = 0.0;
  double recall = 0.0;
};

struct Selection {
  std::size_t index = 0;
  bool fallback = false;  // nobody reached the recall floor
};

Selection select_model(std::span<const Candidate> candidates, double recall_floor = 0.10);

}  // namespace failsearch::surrogate
