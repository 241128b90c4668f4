#include "failsearch/cli.hpp"
#include "failsearch/config/json_io.hpp"
#include "failsearch/error.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace failsearch;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// A path, or the name of a bundled schema ("parking", "trackgen", "perturbation").
config::SchemaPtr open_schema(const std::string& arg) {
  if (fs::exists(arg)) return config::load_schema(arg);
  const fs::path bundled = fs::path(FAILSEARCH_SCHEMA_DIR) / (arg + ".schema.json");
  if (fs::exists(bundled)) return config::load_schema(bundled);
  throw ValidationError("schema not found: " + arg);
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  json params = json::object();
  json timings = json::object();
  std::vector<std::string> outputs;

  void write(const fs::path& dir) const {
    cli::write_json(dir / ("manifest-" + command + ".json"), {{"command", command},
                                                              {"argv", argv},
                                                              {"seed", seed},
                                                              {"params", params},
                                                              {"timings_seconds", timings},
                                                              {"outputs", outputs}});
  }
};

void add_sut_flags(CLI::App* app, cli::SutOptions& o) {
  app->add_option("--sut", o.spec, "System under test: synthetic, parking or exec:<command>")->capture_default_str();
  app->add_option("--sut-noise", o.noise, "Synthetic SUT: probability of flipping a run's verdict")
      ->capture_default_str();
  app->add_option("--failure-rate", o.failure_rate, "Synthetic SUT: target failure rate of random configurations")
      ->capture_default_str();
  app->add_option("--timeout-ms", o.timeout_ms, "External SUT: per-run timeout in milliseconds")->capture_default_str();
  app->add_flag("--deterministic", o.deterministic, "External SUT: declare the command deterministic (one run)");
}

// ---- subcommands ---------------------------------------------------------------

struct GenArgs {
  std::string schema;
  cli::SutOptions sut;
  std::size_t count = 1000;
  int runs = 0;
  std::uint64_t seed = 0;
  double noise_fraction = 0.0, noise_q = 0.0;
  std::string out_dir = ".";
};

int run_gen(const GenArgs& a, Manifest& m) {
  auto t0 = Clock::now();
  cli::GenDatasetSpec spec;
  spec.schema = open_schema(a.schema);
  spec.sut = cli::make_sut(a.sut, spec.schema);
  spec.count = a.count;
  spec.runs_per_config = a.runs;
  spec.seed = a.seed;
  spec.noise_fraction = a.noise_fraction;
  spec.noise_q = a.noise_q;
  const auto d = cli::cmd_gen_dataset(spec);
  m.timings["generate"] = seconds_since(t0);

  std::ostringstream buf;
  data::write_jsonl(d, buf);
  const auto path = fs::path(a.out_dir) / "dataset.jsonl";
  cli::write_atomic(path, buf.str());
  m.outputs.push_back(path.string());
  m.params = {{"schema", spec.schema->name()}, {"sut", spec.sut.to_json()}, {"count", a.count},
              {"noise_fraction", a.noise_fraction}, {"noise_q", a.noise_q}};
  std::printf("%zu episodes, %zu failures -> %s\n", d.size(), d.count(1), path.c_str());
  return 0;
}

struct TrainArgs {
  std::string schema, dataset;
  cli::TrainSpec spec;
  std::string out_dir = ".";
};

int run_train(TrainArgs& a, Manifest& m) {
  auto t0 = Clock::now();
  const auto schema = open_schema(a.schema);
  const auto d = data::load(schema, a.dataset);
  const auto result = cli::cmd_train(d, a.spec);
  m.timings["train"] = seconds_since(t0);

  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const fs::path dir(a.out_dir);
  const auto& best = result.candidates[result.selected];
  cli::write_json(dir / "model.json", result.model.to_json());
  cli::write_json(dir / "metrics.json", {{"precision", best.metrics.precision},
                                         {"recall", best.metrics.recall},
                                         {"val_loss", best.best_val_loss},
                                         {"seed", best.seed},
                                         {"filter", best.filter},
                                         {"layers", best.layers},
                                         {"fallback", result.fallback}});
  cli::write_json(dir / "grid.json", result.grid_json());
  for (const char* f : {"model.json", "metrics.json", "grid.json"}) m.outputs.push_back((dir / f).string());
  m.params = {{"schema", schema->name()},
              {"dataset", a.dataset},
              {"filter_levels", a.spec.filter_levels},
              {"layer_counts", a.spec.layer_counts},
              {"seeds_per_cell", a.spec.seeds_per_cell},
              {"epochs", a.spec.training.epochs},
              {"learning_rate", a.spec.training.learning_rate},
              {"batch_size", a.spec.training.batch_size},
              {"patience", a.spec.training.patience},
              {"hidden_units", a.spec.arch.hidden_units},
              {"dropout", a.spec.arch.dropout},
              {"batchnorm", a.spec.arch.batchnorm}};
  std::printf("%zu candidates; selected filter %.2f, %d layers, precision %.4f, recall %.4f%s\n",
              result.candidates.size(), best.filter, best.layers, best.metrics.precision, best.metrics.recall,
              result.fallback ? " (no candidate reached the recall floor)" : "");
  return 0;
}

struct SearchArgs {
  std::string schema, dataset, model;
  cli::SutOptions sut;
  std::string algo = "hc", mutation = "saliency", seeding = "failure", budget = "500e";
  double filter_fraction = 0.30;
  std::size_t count = 100, neighborhood = 10;
  search::GaConfig ga;
  int runs = 0, repetitions = 10;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

search::MutationStrategy::Kind mutation_kind(const std::string& s) {
  if (s == "saliency") return search::MutationStrategy::Kind::Saliency;
  if (s == "random") return search::MutationStrategy::Kind::Random;
  throw ValidationError("unknown mutation '" + s + "'");
}

search::SeedStrategy::Kind seed_kind(const std::string& s) {
  if (s == "failure") return search::SeedStrategy::Kind::Failure;
  if (s == "random") return search::SeedStrategy::Kind::Random;
  throw ValidationError("unknown seed strategy '" + s + "'");
}

int run_search(const SearchArgs& a, Manifest& m) {
  auto t0 = Clock::now();
  cli::SearchSpec spec;
  spec.schema = open_schema(a.schema);
  spec.sut = cli::make_sut(a.sut, spec.schema);
  spec.algo = search::algorithm_from_string(a.algo);
  spec.mutation = mutation_kind(a.mutation);
  spec.seeding = seed_kind(a.seeding);
  if (!a.model.empty()) spec.model = std::make_shared<const surrogate::Model>(surrogate::Model::load(a.model));
  if (!a.dataset.empty()) spec.failure_pool = cli::failure_pool(data::load(spec.schema, a.dataset), a.filter_fraction);
  spec.count = a.count;
  spec.budget = search::SearchBudget::parse(a.budget);
  spec.neighborhood = a.neighborhood;
  spec.ga = a.ga;
  spec.runs_per_config = a.runs;
  spec.repetitions = a.repetitions;
  spec.seed = a.seed;
  spec.check();
  const auto label = spec.strategy().label();
  m.timings["setup"] = seconds_since(t0);

  t0 = Clock::now();
  const auto reps = cli::cmd_search(spec);
  m.timings["search_and_execute"] = seconds_since(t0);

  const fs::path dir = fs::path(a.out_dir) / label;
  std::size_t total = 0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "rep-%02zu", r);
    cli::write_json(dir / (std::string(stem) + ".campaign.json"), reps[r].campaign.to_json());
    cli::write_json(dir / (std::string(stem) + ".outcomes.json"), cli::outcomes_json(spec, static_cast<int>(r), reps[r]));
    m.outputs.push_back((dir / (std::string(stem) + ".campaign.json")).string());
    m.outputs.push_back((dir / (std::string(stem) + ".outcomes.json")).string());
    std::printf("%s rep %zu: %zu failures / %zu\n", label.c_str(), r, reps[r].failures, reps[r].outcomes.size());
    total += reps[r].failures;
  }
  std::printf("%s total: %zu failures over %zu repetitions\n", label.c_str(), total, reps.size());
  m.params = {{"strategy", label}, {"schema", spec.schema->name()}, {"sut", spec.sut.to_json()},
              {"T", a.count}, {"budget", spec.budget.to_string()}, {"repetitions", a.repetitions},
              {"filter_fraction", a.filter_fraction}, {"failure_pool", spec.failure_pool.size()}};
  m.write(dir);
  return 0;
}

struct AnalyzeArgs {
  std::string schema;
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  int clustering_runs = 10;
  double alpha = 0.05;
  std::string out_dir = ".";
};

// Files as given; directories contribute their *.outcomes.json, sorted by path.
std::vector<fs::path> outcome_paths(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) {
      out.emplace_back(in);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(in)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.size() > 14 && name.ends_with(".outcomes.json")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

int run_analyze(const AnalyzeArgs& a, Manifest& m) {
  auto t0 = Clock::now();
  const auto schema = open_schema(a.schema);
  std::vector<cli::OutcomeFile> files;
  for (const auto& p : outcome_paths(a.inputs)) files.push_back(cli::read_outcome_file(schema, cli::read_json(p)));
  analysis::ReportOptions options;
  options.clustering_runs = a.clustering_runs;
  const auto report = cli::cmd_analyze(files, a.seed, options);
  m.timings["analyze"] = seconds_since(t0);

  const fs::path dir(a.out_dir);
  const auto table = cli::format_table(report, a.alpha);
  cli::write_json(dir / "report.json", report.to_json());
  cli::write_atomic(dir / "report.csv", report.to_csv());
  cli::write_atomic(dir / "table.txt", table);
  for (const char* f : {"report.json", "report.csv", "table.txt"}) m.outputs.push_back((dir / f).string());
  m.params = {{"schema", schema->name()}, {"files", files.size()}, {"clustering_runs", a.clustering_runs},
              {"alpha", a.alpha}};
  std::fputs(table.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-guided failure search for parameterized simulated systems"};
  app.require_subcommand(1);
  Manifest manifest;
  manifest.argv.assign(argv, argv + argc);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Execute random configurations and write a JSON Lines dataset");
  gen_cmd->add_option("--schema", gen.schema, "Schema file or bundled schema name")->required();
  add_sut_flags(gen_cmd, gen.sut);
  gen_cmd->add_option("--count,-n", gen.count, "Number of episodes")->capture_default_str();
  gen_cmd->add_option("--runs-per-config", gen.runs, "Runs per configuration (0: the SUT's default)")
      ->capture_default_str();
  gen_cmd->add_option("--noise-fraction", gen.noise_fraction, "Share of early episodes subject to label noise")
      ->capture_default_str();
  gen_cmd->add_option("--noise-prob", gen.noise_q, "Probability an early episode is relabelled a failure")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train surrogates over the filter x layers grid and keep the best");
  train_cmd->add_option("--schema", tr.schema, "Schema file or bundled schema name")->required();
  train_cmd->add_option("--dataset", tr.dataset, "JSON Lines dataset")->required();
  train_cmd->add_option("--filter-levels", tr.spec.filter_levels, "Fractions of early episodes to drop")
      ->capture_default_str()->delimiter(',');
  train_cmd->add_option("--layers", tr.spec.layer_counts, "Hidden layer counts")->capture_default_str()->delimiter(',');
  train_cmd->add_option("--seeds-per-cell", tr.spec.seeds_per_cell, "Training seeds per grid cell")
      ->capture_default_str();
  train_cmd->add_option("--val-fraction", tr.spec.val_fraction, "Validation share")->capture_default_str();
  train_cmd->add_option("--test-fraction", tr.spec.test_fraction, "Held-out test share")->capture_default_str();
  train_cmd->add_option("--recall-floor", tr.spec.recall_floor, "Minimum recall for selection")->capture_default_str();
  train_cmd->add_option("--hidden-units", tr.spec.arch.hidden_units, "Units per hidden layer")->capture_default_str();
  train_cmd->add_option("--dropout", tr.spec.arch.dropout, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--batchnorm", tr.spec.arch.batchnorm, "Batch normalization (true/false)")
      ->capture_default_str();
  train_cmd->add_option("--lr", tr.spec.training.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tr.spec.training.epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.spec.training.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--patience", tr.spec.training.patience, "Early-stopping patience in epochs")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.spec.seed, "Master seed")->capture_default_str();
  train_cmd->add_option("--out-dir", tr.out_dir, "Output directory")->capture_default_str();

  SearchArgs se;
  auto* search_cmd = app.add_subcommand("search", "Run search campaigns and execute the selected configurations");
  search_cmd->add_option("--schema", se.schema, "Schema file or bundled schema name")->required();
  search_cmd->add_option("--dataset", se.dataset, "Dataset supplying failure seeds");
  search_cmd->add_option("--model", se.model, "Trained surrogate (model.json)");
  add_sut_flags(search_cmd, se.sut);
  search_cmd->add_option("--algo", se.algo, "random, sampling, hc or ga")->capture_default_str();
  search_cmd->add_option("--mutation", se.mutation, "random or saliency")->capture_default_str();
  search_cmd->add_option("--seed-strategy", se.seeding, "random or failure")->capture_default_str();
  search_cmd->add_option("--filter-fraction", se.filter_fraction, "Early share of the dataset ignored for failure seeds")
      ->capture_default_str();
  search_cmd->add_option("--T", se.count, "Configurations per repetition")->capture_default_str();
  search_cmd->add_option("--budget", se.budget, "Per-search budget: <N>e evaluations or <N>s seconds")
      ->capture_default_str();
  search_cmd->add_option("--neighborhood", se.neighborhood, "Hill-climbing neighbours per step")->capture_default_str();
  search_cmd->add_option("--population", se.ga.population_size, "GA population size")->capture_default_str();
  search_cmd->add_option("--crossover-rate", se.ga.crossover_rate, "GA crossover rate")->capture_default_str();
  search_cmd->add_option("--runs-per-config", se.runs, "Runs per configuration (0: the SUT's default)")
      ->capture_default_str();
  search_cmd->add_option("--repetitions", se.repetitions, "Independent repetitions")->capture_default_str();
  search_cmd->add_option("--seed", se.seed, "Master seed")->capture_default_str();
  search_cmd->add_option("--out-dir", se.out_dir, "Output directory (a subdirectory per strategy)")
      ->capture_default_str();

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Failure counts, diversity and pairwise statistics");
  analyze_cmd->add_option("--schema", an.schema, "Schema file or bundled schema name")->required();
  analyze_cmd->add_option("inputs", an.inputs, "Outcome files or directories holding *.outcomes.json")->required();
  analyze_cmd->add_option("--clustering-runs", an.clustering_runs, "Clustering repetitions")->capture_default_str();
  analyze_cmd->add_option("--alpha", an.alpha, "Significance level")->capture_default_str();
  analyze_cmd->add_option("--seed", an.seed, "Master seed")->capture_default_str();
  analyze_cmd->add_option("--out-dir", an.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto t0 = Clock::now();
    int rc = 0;
    fs::path dir;
    if (*gen_cmd) {
      manifest.command = "gen-dataset";
      manifest.seed = gen.seed;
      rc = run_gen(gen, manifest);
      dir = gen.out_dir;
    } else if (*train_cmd) {
      manifest.command = "train";
      manifest.seed = tr.spec.seed;
      rc = run_train(tr, manifest);
      dir = tr.out_dir;
    } else if (*search_cmd) {
      manifest.command = "search";
      manifest.seed = se.seed;
      return run_search(se, manifest);  // writes its own manifest
    } else {
      manifest.command = "analyze";
      manifest.seed = an.seed;
      rc = run_analyze(an, manifest);
      dir = an.out_dir;
    }
    manifest.timings["total"] = seconds_since(t0);
    manifest.write(dir);
    return rc;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cli::exit_code(e);
  }
}
