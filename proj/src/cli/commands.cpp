#include "failsearch/cli.hpp"
#include "failsearch/error.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace failsearch::cli {

using nlohmann::json;

namespace {

constexpr std::uint64_t kConfigStream = 0xC0F1;
constexpr std::uint64_t kExecStream = 0xE8EC;
constexpr std::uint64_t kNoiseStream = 0x4015E;
constexpr std::uint64_t kSplitStream = 0x5B117;
constexpr std::uint64_t kTrainStream = 0x7124;

// Executes configs[i] with seed derive_seed(seed, i), one SUT per thread.
std::vector<exec::ExecutionOutcome> execute_all(const exec::SutDescriptor& sut, const config::SchemaPtr& schema,
                                                const std::vector<config::EnvConfiguration>& configs, int runs,
                                                std::uint64_t seed) {
  std::vector<std::optional<exec::ExecutionOutcome>> slots(configs.size());
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(configs.size());
#pragma omp parallel
  {
    std::unique_ptr<exec::SystemUnderTest> local;
    try {
      local = exec::instantiate(sut, schema);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) {
      if (!local) continue;
      try {
        slots[static_cast<std::size_t>(i)] =
            exec::execute(*local, configs[static_cast<std::size_t>(i)], runs, derive_seed(seed, static_cast<std::uint64_t>(i)));
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  std::vector<exec::ExecutionOutcome> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

int runs_for(const exec::SutDescriptor& sut, int requested) {
  if (requested < 0) throw ValidationError("runs per configuration must be positive");
  return requested > 0 ? requested : sut.runs_per_config;
}

}  // namespace

// ---- gen-dataset ------------------------------------------------------------

data::InteractionDataset cmd_gen_dataset(const GenDatasetSpec& spec) {
  if (spec.count == 0) throw DegenerateData("requested an empty dataset");
  if (!(spec.noise_fraction >= 0.0 && spec.noise_fraction <= 1.0) || !(spec.noise_q >= 0.0 && spec.noise_q <= 1.0))
    throw ValidationError("label-noise fraction and probability must lie in [0, 1]");
  std::vector<config::EnvConfiguration> configs;
  configs.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng = derive_rng(derive_seed(spec.seed, kConfigStream), i);
    configs.push_back(config::generate_random(spec.schema, rng));
  }
  const auto outcomes = execute_all(spec.sut, spec.schema, configs, runs_for(spec.sut, spec.runs_per_config),
                                    derive_seed(spec.seed, kExecStream));
  const auto noisy = static_cast<std::size_t>(std::floor(spec.noise_fraction * static_cast<double>(spec.count) + 1e-9));
  std::vector<data::Record> records;
  records.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    int label = exec::is_failure(outcomes[i]) ? 1 : 0;
    if (i < noisy) {
      Rng rng = derive_rng(derive_seed(spec.seed, kNoiseStream), i);
      if (bernoulli(rng, spec.noise_q)) label = 1;
    }
    records.push_back({static_cast<std::int64_t>(i), configs[i], label});
  }
  return data::InteractionDataset(spec.schema, std::move(records));
}

// ---- train --------------------------------------------------------------------

json TrainResult::grid_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    rows.push_back({{"filter", c.filter},
                    {"layers", c.layers},
                    {"seed_index", c.seed_index},
                    {"seed", c.seed},
                    {"precision", c.metrics.precision},
                    {"recall", c.metrics.recall},
                    {"precision_undefined", c.metrics.precision_undefined},
                    {"recall_undefined", c.metrics.recall_undefined},
                    {"tp", c.metrics.tp},
                    {"fp", c.metrics.fp},
                    {"fn", c.metrics.fn},
                    {"tn", c.metrics.tn},
                    {"val_loss", c.best_val_loss},
                    {"epochs_run", c.epochs_run},
                    {"selected", i == selected}});
  }
  return {{"candidates", std::move(rows)},
          {"selected", selected},
          {"fallback", fallback},
          {"warnings", warnings}};
}

TrainResult cmd_train(const data::InteractionDataset& dataset, const TrainSpec& spec) {
  if (spec.filter_levels.empty() || spec.layer_counts.empty() || spec.seeds_per_cell < 1)
    throw ValidationError("training grid is empty");
  struct Cell {
    double filter;
    int layers;
    std::optional<data::Split> split;
    data::ClassWeights weights;
  };
  std::vector<Cell> cells;
  std::vector<std::string> warnings;
  for (std::size_t fi = 0; fi < spec.filter_levels.size(); ++fi) {
    const double f = spec.filter_levels[fi];
    // One split per filter level so layer counts compete on the same data.
    std::optional<data::Split> split;
    data::ClassWeights weights;
    try {
      const auto filtered = data::filter_initial(dataset, f);
      Rng rng = derive_rng(derive_seed(spec.seed, kSplitStream), fi);
      split = data::split(filtered, spec.val_fraction, spec.test_fraction, rng);
      weights = data::class_weights(split->train.labels());
      if (split->test.count(1) == 0) throw DegenerateData("no failures in the test split");
    } catch (const DegenerateData& e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "filter %.2f skipped: ", f);
      warnings.push_back(buf + std::string(e.what()));
      split.reset();
    }
    for (int layers : spec.layer_counts) cells.push_back({f, layers, split, weights});
  }

  struct Job {
    std::size_t cell;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    if (cells[c].split)
      for (int s = 0; s < spec.seeds_per_cell; ++s) jobs.push_back({c, s});
  if (jobs.empty()) throw DegenerateData("every training cell is degenerate");

  std::vector<std::optional<surrogate::Model>> models(jobs.size());
  std::vector<TrainCandidate> candidates(jobs.size());
  std::vector<std::string> job_warnings(jobs.size());
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t j = 0; j < n; ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    const auto& cell = cells[job.cell];
    auto& cand = candidates[static_cast<std::size_t>(j)];
    cand.filter = cell.filter;
    cand.layers = cell.layers;
    cand.seed_index = job.seed_index;
    cand.seed = derive_seed(derive_seed(spec.seed, kTrainStream), job.cell * 1000 + static_cast<std::size_t>(job.seed_index));
    try {
      auto arch = spec.arch;
      arch.input_width = dataset.schema()->encoded_width();
      arch.hidden_layers = cell.layers;
      auto cfg = spec.training;
      cfg.weights = cell.weights;
      cfg.seed = cand.seed;
      auto model = surrogate::train(cell.split->train, cell.split->val, arch, cfg);
      cand.metrics = surrogate::precision_recall(model, cell.split->test);
      cand.best_val_loss = model.info.best_val_loss;
      cand.epochs_run = model.info.epochs_run;
      models[static_cast<std::size_t>(j)] = std::move(model);
    } catch (const Diverged& e) {
      job_warnings[static_cast<std::size_t>(j)] = e.what();
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  TrainResult result;
  result.warnings = std::move(warnings);
  std::vector<surrogate::Candidate> scored;
  std::vector<std::size_t> index_of;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!models[j]) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "filter %.2f, %d layers, seed %d skipped: ", candidates[j].filter,
                    candidates[j].layers, candidates[j].seed_index);
      result.warnings.push_back(buf + job_warnings[j]);
      continue;
    }
    scored.push_back({candidates[j].metrics.precision, candidates[j].metrics.recall});
    index_of.push_back(j);
    result.candidates.push_back(candidates[j]);
  }
  if (scored.empty()) throw DegenerateData("no training run produced a model");
  const auto sel = surrogate::select_model(scored, spec.recall_floor);
  result.selected = sel.index;
  result.fallback = sel.fallback;
  result.model = std::move(*models[index_of[sel.index]]);
  return result;
}

// ---- search -------------------------------------------------------------------

std::vector<config::EnvConfiguration> failure_pool(const data::InteractionDataset& d, double filter) {
  return data::filter_initial(d, filter).configs_with_label(1);
}

void SearchSpec::check() const {
  if (!schema) throw ValidationError("search needs a schema");
  if (count < 1 || repetitions < 1) throw ValidationError("configurations and repetitions must be positive");
  if (algo != search::Algorithm::Random && !model)
    throw ValidationError(std::string(search::to_string(algo)) + " needs a trained model (--model)");
  const bool operators = algo == search::Algorithm::HillClimbing || algo == search::Algorithm::Genetic;
  if (operators && seeding == search::SeedStrategy::Kind::Failure && failure_pool.empty())
    throw ValidationError("failure seeding needs a dataset with failures left after filtering (--dataset)");
}

search::StrategySpec SearchSpec::strategy() const {
  search::StrategySpec s;
  s.algo = algo;
  s.budget = budget;
  s.neighborhood = neighborhood;
  s.ga = ga;
  const bool operators = algo == search::Algorithm::HillClimbing || algo == search::Algorithm::Genetic;
  if (operators) {
    s.mutation = mutation == search::MutationStrategy::Kind::Saliency ? search::MutationStrategy::saliency(model)
                                                                      : search::MutationStrategy::random();
    s.seed = seeding == search::SeedStrategy::Kind::Failure ? search::SeedStrategy::failure(failure_pool)
                                                            : search::SeedStrategy::random();
  }
  return s;
}

std::vector<Repetition> cmd_search(const SearchSpec& spec) {
  spec.check();
  const auto strategy = spec.strategy();
  search::Fitness fitness;
  if (spec.model) fitness = search::surrogate_fitness(spec.model);
  const int runs = runs_for(spec.sut, spec.runs_per_config);
  std::vector<Repetition> out;
  for (int r = 0; r < spec.repetitions; ++r) {
    const auto rep_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
    Repetition rep;
    rep.campaign = search::run_campaign(strategy, spec.count, fitness, spec.schema, rep_seed);
    std::vector<config::EnvConfiguration> configs;
    for (const auto& e : rep.campaign.entries) configs.push_back(e.config);
    rep.outcomes = execute_all(spec.sut, spec.schema, configs, runs, derive_seed(rep_seed, kExecStream));
    for (const auto& o : rep.outcomes) rep.failures += exec::is_failure(o) ? 1 : 0;
    out.push_back(std::move(rep));
  }
  return out;
}

json outcomes_json(const SearchSpec& spec, int repetition, const Repetition& rep) {
  json outcomes = json::array();
  for (const auto& o : rep.outcomes) outcomes.push_back(o.to_json());
  return {{"strategy", spec.strategy().label()},
          {"repetition", repetition},
          {"schema", spec.schema->name()},
          {"sut", spec.sut.to_json()},
          {"master_seed", rep.campaign.master_seed},
          {"executed", rep.outcomes.size()},
          {"failures", rep.failures},
          {"outcomes", std::move(outcomes)}};
}

// ---- analyze ----------------------------------------------------------------

OutcomeFile read_outcome_file(const config::SchemaPtr& schema, const json& doc) {
  try {
    OutcomeFile f;
    f.strategy = doc.at("strategy").get<std::string>();
    f.repetition = doc.value("repetition", 0);
    if (doc.contains("schema") && doc.at("schema").get<std::string>() != schema->name())
      throw SchemaMismatch("outcome file was produced with schema '" + doc.at("schema").get<std::string>() + "'");
    for (const auto& o : doc.at("outcomes")) f.outcomes.push_back(exec::ExecutionOutcome::from_json(schema, o));
    return f;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed outcome file: ") + e.what());
  }
}

std::vector<analysis::ApproachData> approaches_from(std::span<const OutcomeFile> files) {
  std::vector<analysis::ApproachData> out;
  std::map<std::string, std::size_t> index;
  for (const auto& f : files) {
    auto [it, fresh] = index.try_emplace(f.strategy, out.size());
    if (fresh) out.push_back({f.strategy, {}});
    analysis::RepetitionFailures rep;
    rep.executed = f.outcomes.size();
    for (const auto& o : f.outcomes) {
      if (!exec::is_failure(o)) continue;
      rep.inputs.push_back(config::encode(o.config));
      // The first failing run stands for the configuration's behaviour.
      for (std::size_t r = 0; r < o.run_failed.size(); ++r) {
        if (o.run_failed[r]) {
          rep.outputs.push_back(o.trajectories[r]);
          break;
        }
      }
    }
    out[it->second].repetitions.push_back(std::move(rep));
  }
  return out;
}

analysis::DiversityReport cmd_analyze(std::span<const OutcomeFile> files, std::uint64_t seed,
                                      const analysis::ReportOptions& options) {
  if (files.empty()) throw ValidationError("analyze needs at least one outcome file");
  const auto approaches = approaches_from(files);
  return analysis::build_diversity_report(approaches, seed, options);
}

bool significant(double p_value, double alpha) noexcept { return p_value < alpha; }

std::string format_table(const analysis::DiversityReport& report, double alpha) {
  std::ostringstream out;
  std::size_t name_width = 8;
  for (const auto& a : report.approaches) name_width = std::max(name_width, a.name.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %9s %9s\n", static_cast<int>(name_width), "approach", "failures",
                "in_cov", "in_ent", "out_cov", "out_ent");
  out << buf;
  for (const auto& a : report.approaches) {
    out << a.name << std::string(name_width - a.name.size(), ' ');
    const std::vector<const std::vector<double>*> cols{&a.failures, &a.input_coverage, &a.input_entropy,
                                                       &a.output_coverage, &a.output_entropy};
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = analysis::ApproachSummary::mean(*cols[c]);
      if (std::isfinite(v))
        std::snprintf(buf, sizeof buf, c == 0 ? " %9.2f" : " %9.4f", v);
      else
        std::snprintf(buf, sizeof buf, " %9s", "N/A");
      out << buf;
    }
    out << '\n';
  }
  if (!report.pairwise.empty()) {
    std::snprintf(buf, sizeof buf, "\npairwise (* p < %g, L large effect)\n", alpha);
    out << buf;
    for (const auto& p : report.pairwise) {
      out << p.first << " vs " << p.second << "  " << p.metric << "  ";
      if (!p.p_value || !p.a12) {
        out << "N/A\n";
        continue;
      }
      std::snprintf(buf, sizeof buf, "p=%.4g%s  A12=%.3f%s\n", *p.p_value, significant(*p.p_value, alpha) ? "*" : "",
                    *p.a12, analysis::effect_size(*p.a12) == analysis::EffectSize::Large ? " L" : "");
      out << buf;
    }
  }
  if (!report.diversity_available) out << "\ndiversity unavailable: fewer than two failures overall\n";
  return out.str();
}

}  // namespace failsearch::cli
