#pragma once

#include "failsearch/config/json_io.hpp"
#include "failsearch/config/operators.hpp"
#include "failsearch/surrogate.hpp"

#include <chrono>
#include <functional>
#include <json.hpp>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace failsearch::search {

using config::EnvConfiguration;
using config::SchemaPtr;

// Failure prediction for a configuration. Must be safe to call concurrently
// when campaigns run in parallel.
using Fitness = std::function<double(const EnvConfiguration&)>;
using GradientFn = std::function<std::vector<double>(const EnvConfiguration&)>;

Fitness surrogate_fitness(std::shared_ptr<const surrogate::Model> model);

struct SearchBudget {
  enum class Mode { Evaluations, Seconds };
  Mode mode = Mode::Evaluations;
  double amount = 0.0;

  static SearchBudget evaluations(std::size_t n) { return {Mode::Evaluations, static_cast<double>(n)}; }
  static SearchBudget seconds(double s) { return {Mode::Seconds, s}; }
  // "500e", "500 evals", "5s"
  static SearchBudget parse(const std::string& text);
  std::string to_string() const;
};

// Charges fitness evaluations against a budget. In seconds mode the clock is
// checked between evaluations only.
class BudgetMeter {
public:
  explicit BudgetMeter(const SearchBudget& budget);
  bool remaining() const;
  double evaluate(const Fitness& f, const EnvConfiguration& e);
  std::size_t used() const noexcept { return used_; }

private:
  SearchBudget budget_;
  std::chrono::steady_clock::time_point start_;
  std::size_t used_ = 0;
};

struct SeedStrategy {
  enum class Kind { Random, Failure };
  Kind kind = Kind::Random;
  std::vector<EnvConfiguration> pool;

  static SeedStrategy random() { return {}; }
  static SeedStrategy failure(std::vector<EnvConfiguration> pool);
};

struct MutationStrategy {
  enum class Kind { Random, Saliency };
  Kind kind = Kind::Random;
  GradientFn gradient;

  static MutationStrategy random() { return {}; }
  static MutationStrategy saliency(std::shared_ptr<const surrogate::Model> model);
  static MutationStrategy saliency(GradientFn gradient);

  EnvConfiguration apply(const EnvConfiguration& e, Rng& rng) const;
};

struct GaConfig {
  std::size_t population_size = 50;
  double crossover_rate = 0.75;
  double elite_fraction = 0.10;
  std::size_t reseed_period = 5;
  double reseed_fraction = 0.20;

  void check() const;
  std::size_t elite_count() const;
  std::size_t reseed_count() const;
};

struct SearchResult {
  explicit SearchResult(EnvConfiguration b, double f = std::numeric_limits<double>::quiet_NaN())
      : best(std::move(b)), fitness(f) {}

  EnvConfiguration best;
  double fitness;  // NaN when nothing was evaluated
  std::size_t evals_used = 0;
  bool below_one_evaluation = false;
  std::size_t generated = 0;   // configurations created by the strategy
  std::vector<double> trace;   // incumbent / best-of-population fitness per iteration
};

SearchResult hill_climb(const Fitness& f, const SchemaPtr& schema, std::size_t neighborhood,
                        const SearchBudget& budget, const std::optional<EnvConfiguration>& start,
                        const MutationStrategy& mut, Rng& rng);

SearchResult genetic_search(const Fitness& f, const SchemaPtr& schema, const GaConfig& cfg,
                            const SearchBudget& budget, const SeedStrategy& seed, const MutationStrategy& mut,
                            Rng& rng);

SearchResult sampling_search(const Fitness& f, const SchemaPtr& schema, const SearchBudget& budget, Rng& rng);

inline EnvConfiguration random_search(const SchemaPtr& schema, Rng& rng) {
  return config::generate_random(schema, rng);
}

enum class Algorithm { Random, Sampling, HillClimbing, Genetic };

const char* to_string(Algorithm a) noexcept;
Algorithm algorithm_from_string(const std::string& s);

struct StrategySpec {
  Algorithm algo = Algorithm::Random;
  MutationStrategy mutation;
  SeedStrategy seed;
  std::size_t neighborhood = 10;
  GaConfig ga;
  SearchBudget budget = SearchBudget::evaluations(500);

  // Short label such as "hc-saliency-failure".
  std::string label() const;
};

struct CampaignEntry {
  CampaignEntry(EnvConfiguration c, double f, std::size_t evals) : config(std::move(c)), fitness(f), evals_used(evals) {}

  EnvConfiguration config;
  double fitness;  // NaN for strategies that never consult the fitness
  std::size_t evals_used = 0;
  bool below_one_evaluation = false;
  std::vector<double> trace;
};

struct CampaignResult {
  std::string algo, mutation, seed_kind;
  nlohmann::json params;
  std::uint64_t master_seed = 0;
  std::vector<CampaignEntry> entries;

  nlohmann::json to_json() const;
  static CampaignResult from_json(const SchemaPtr& schema, const nlohmann::json& doc);
};

// T independent strategy invocations, entry t using the stream derived from
// (master_seed, t). Entries may run in parallel; order is by t regardless.
CampaignResult run_campaign(const StrategySpec& spec, std::size_t count, const Fitness& f, const SchemaPtr& schema,
                            std::uint64_t master_seed, bool parallel = true);

}  // namespace failsearch::search
