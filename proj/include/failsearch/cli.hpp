#pragma once

#include "failsearch/analysis.hpp"
#include "failsearch/dataset.hpp"
#include "failsearch/executor.hpp"
#include "failsearch/search.hpp"
#include "failsearch/surrogate.hpp"

#include <filesystem>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace failsearch::cli {

namespace fs = std::filesystem;

// ---- plumbing ---------------------------------------------------------------

int exit_code(const std::exception& e) noexcept;

// Temp file in the same directory, then rename.
void write_atomic(const fs::path& path, const std::string& contents);
void write_json(const fs::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const fs::path& path);

// "synthetic", "parking" or "exec:<command>".
struct SutOptions {
  std::string spec = "synthetic";
  double noise = 0.0;              // synthetic only
  double failure_rate = 0.1;       // synthetic only
  int timeout_ms = 10000;          // exec only
  bool deterministic = false;      // exec only
};
exec::SutDescriptor make_sut(const SutOptions& options, const config::SchemaPtr& schema);

// ---- gen-dataset ------------------------------------------------------------

struct GenDatasetSpec {
  config::SchemaPtr schema;
  exec::SutDescriptor sut;
  std::size_t count = 1000;
  int runs_per_config = 0;  // 0: the SUT's default
  std::uint64_t seed = 0;
  // Early-phase label noise: the first noise_fraction of episodes are
  // relabelled as failures with probability noise_q.
  double noise_fraction = 0.0;
  double noise_q = 0.0;
};

data::InteractionDataset cmd_gen_dataset(const GenDatasetSpec& spec);

// ---- train --------------------------------------------------------------------

struct TrainSpec {
  std::vector<double> filter_levels{0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80};
  std::vector<int> layer_counts{1, 2, 3, 4};
  int seeds_per_cell = 10;
  double val_fraction = 0.2;
  double test_fraction = 0.1;
  double recall_floor = 0.10;
  surrogate::Architecture arch;  // input_width filled from the schema
  surrogate::TrainingConfig training;
  std::uint64_t seed = 0;
};

struct TrainCandidate {
  double filter = 0.0;
  int layers = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  surrogate::ClassifierMetrics metrics;
  double best_val_loss = 0.0;
  int epochs_run = 0;
};

struct TrainResult {
  surrogate::Model model;
  std::vector<TrainCandidate> candidates;
  std::size_t selected = 0;
  bool fallback = false;
  std::vector<std::string> warnings;  // skipped cells

  nlohmann::json grid_json() const;
};

TrainResult cmd_train(const data::InteractionDataset& dataset, const TrainSpec& spec);

// ---- search -------------------------------------------------------------------

struct SearchSpec {
  config::SchemaPtr schema;
  std::shared_ptr<const surrogate::Model> model;  // needed by all but random
  std::vector<config::EnvConfiguration> failure_pool;  // needed by failure seeding
  exec::SutDescriptor sut;
  search::Algorithm algo = search::Algorithm::HillClimbing;
  search::MutationStrategy::Kind mutation = search::MutationStrategy::Kind::Saliency;
  search::SeedStrategy::Kind seeding = search::SeedStrategy::Kind::Failure;
  std::size_t count = 100;  // configurations per repetition
  search::SearchBudget budget = search::SearchBudget::evaluations(500);
  std::size_t neighborhood = 10;
  search::GaConfig ga;
  int runs_per_config = 0;  // 0: the SUT's default
  int repetitions = 10;
  std::uint64_t seed = 0;

  void check() const;
  search::StrategySpec strategy() const;
};

struct Repetition {
  search::CampaignResult campaign;
  std::vector<exec::ExecutionOutcome> outcomes;
  std::size_t failures = 0;
};

// Failure-seed pool: failing configurations left after dropping the first
// `filter` share of the dataset.
std::vector<config::EnvConfiguration> failure_pool(const data::InteractionDataset& d, double filter);

std::vector<Repetition> cmd_search(const SearchSpec& spec);

// Outcome file of one repetition; what `analyze` reads back.
nlohmann::json outcomes_json(const SearchSpec& spec, int repetition, const Repetition& rep);

// ---- analyze ----------------------------------------------------------------

struct OutcomeFile {
  std::string strategy;
  int repetition = 0;
  std::vector<exec::ExecutionOutcome> outcomes;
};

OutcomeFile read_outcome_file(const config::SchemaPtr& schema, const nlohmann::json& doc);

// Groups files by strategy (first-seen order) and keeps file order within.
std::vector<analysis::ApproachData> approaches_from(std::span<const OutcomeFile> files);

analysis::DiversityReport cmd_analyze(std::span<const OutcomeFile> files, std::uint64_t seed,
                                      const analysis::ReportOptions& options = {});

bool significant(double p_value, double alpha) noexcept;
std::string format_table(const analysis::DiversityReport& report, double alpha = 0.05);

}  // namespace failsearch::cli
