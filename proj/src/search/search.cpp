#include "failsearch/error.hpp"
#include "failsearch/search.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

namespace failsearch::search {

namespace {

constexpr double kUnevaluated = -std::numeric_limits<double>::infinity();

struct Individual {
  EnvConfiguration config;
  double fitness = kUnevaluated;
  bool evaluated = false;
};

std::size_t best_index(const std::vector<Individual>& pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop[i].fitness > pop[best].fitness) best = i;
  return best;
}

const Individual& tournament(const std::vector<Individual>& pop, Rng& rng) {
  const auto hi = static_cast<std::int64_t>(pop.size()) - 1;
  const auto& a = pop[static_cast<std::size_t>(uniform_int(rng, 0, hi))];
  const auto& b = pop[static_cast<std::size_t>(uniform_int(rng, 0, hi))];
  return b.fitness > a.fitness ? b : a;
}

EnvConfiguration sample_pool(const std::vector<EnvConfiguration>& pool, Rng& rng) {
  return pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(pool.size()) - 1))];
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

Fitness surrogate_fitness(std::shared_ptr<const surrogate::Model> model) {
  return [model = std::move(model)](const EnvConfiguration& e) { return model->predict(config::encode(e)); };
}

SearchBudget SearchBudget::parse(const std::string& text) {
  std::string t;
  for (char c : text)
    if (c != ' ') t.push_back(c);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  const std::string unit(ptr, static_cast<std::size_t>(t.data() + t.size() - ptr));
  if (ec != std::errc() || !(value >= 0.0) || !std::isfinite(value))
    throw ValidationError("budget must look like 5s or 500e, got '" + text + "'");
  if (unit == "s" || unit == "sec" || unit == "seconds") return seconds(value);
  if (unit == "e" || unit == "evals" || unit == "evaluations") {
    if (value != std::floor(value)) throw ValidationError("evaluation budget must be a whole number");
    return {Mode::Evaluations, value};
  }
  throw ValidationError("budget unit must be s or e, got '" + text + "'");
}

std::string SearchBudget::to_string() const {
  if (mode == Mode::Evaluations) return std::to_string(static_cast<std::size_t>(amount)) + "e";
  std::string s = std::to_string(amount);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return s + "s";
}

BudgetMeter::BudgetMeter(const SearchBudget& budget) : budget_(budget), start_(std::chrono::steady_clock::now()) {}

bool BudgetMeter::remaining() const {
  if (budget_.mode == SearchBudget::Mode::Evaluations) return static_cast<double>(used_) < budget_.amount;
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
  return elapsed.count() < budget_.amount;
}

double BudgetMeter::evaluate(const Fitness& f, const EnvConfiguration& e) {
  ++used_;
  return f(e);
}

SeedStrategy SeedStrategy::failure(std::vector<EnvConfiguration> pool) {
  if (pool.empty()) throw ValidationError("failure seeding needs a non-empty failure pool");
  return {Kind::Failure, std::move(pool)};
}

MutationStrategy MutationStrategy::saliency(std::shared_ptr<const surrogate::Model> model) {
  if (!model) throw ValidationError("saliency mutation needs a model");
  return saliency([model = std::move(model)](const EnvConfiguration& e) { return model->saliency(config::encode(e)); });
}

MutationStrategy MutationStrategy::saliency(GradientFn gradient) {
  if (!gradient) throw ValidationError("saliency mutation needs a gradient");
  return {Kind::Saliency, std::move(gradient)};
}

EnvConfiguration MutationStrategy::apply(const EnvConfiguration& e, Rng& rng) const {
  if (kind == Kind::Random) return config::mutate_random(e, rng);
  const auto move = surrogate::saliency_to_parameter(gradient(e), e.schema());
  return config::mutate_directed(e, move, rng);
}

void GaConfig::check() const {
  if (population_size < 2) throw ValidationError("population size must be at least 2");
  for (double r : {crossover_rate, elite_fraction, reseed_fraction})
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("GA rates must lie in [0, 1]");
  if (reseed_period == 0) throw ValidationError("reseed period must be positive");
}

std::size_t GaConfig::elite_count() const {
  const auto n = static_cast<std::size_t>(std::floor(elite_fraction * static_cast<double>(population_size) + 1e-9));
  return std::clamp<std::size_t>(n, 1, population_size);
}

std::size_t GaConfig::reseed_count() const {
  const auto n = static_cast<std::size_t>(std::ceil(reseed_fraction * static_cast<double>(population_size) - 1e-9));
  // Never reseed the whole population: the best individual survives.
  return std::min(n, population_size - 1);
}

SearchResult hill_climb(const Fitness& f, const SchemaPtr& schema, std::size_t neighborhood,
                        const SearchBudget& budget, const std::optional<EnvConfiguration>& start,
                        const MutationStrategy& mut, Rng& rng) {
  if (neighborhood < 1) throw ValidationError("neighborhood size must be at least 1");
  BudgetMeter meter(budget);
  EnvConfiguration e = start ? *start : config::generate_random(schema, rng);
  SearchResult out(e);
  out.generated = start ? 0 : 1;
  if (!meter.remaining()) {
    out.below_one_evaluation = true;
    return out;
  }

  // f is deterministic, so the incumbent's value is carried over instead of
  // being recomputed each iteration.
  double fe = meter.evaluate(f, e);
  out.trace.push_back(fe);
  while (meter.remaining()) {
    std::optional<config::DirectedMove> move;
    if (mut.kind == MutationStrategy::Kind::Saliency)
      move = surrogate::saliency_to_parameter(mut.gradient(e), *schema);
    std::size_t j = 0;  // 0 = incumbent
    double best = fe;
    std::optional<EnvConfiguration> chosen;
    for (std::size_t i = 0; i < neighborhood && meter.remaining(); ++i) {
      auto ei = move ? config::mutate_directed(e, *move, rng) : config::mutate_random(e, rng);
      ++out.generated;
      const double fi = meter.evaluate(f, ei);
      if (fi > best) {
        best = fi;
        j = i + 1;
        chosen = std::move(ei);
      }
    }
    if (j != 0) {
      e = std::move(*chosen);
      fe = best;
    }
    out.trace.push_back(fe);
  }
  out.best = e;
  out.fitness = fe;
  out.evals_used = meter.used();
  return out;
}

SearchResult genetic_search(const Fitness& f, const SchemaPtr& schema, const GaConfig& cfg,
                            const SearchBudget& budget, const SeedStrategy& seed, const MutationStrategy& mut,
                            Rng& rng) {
  cfg.check();
  const std::size_t ps = cfg.population_size;
  BudgetMeter meter(budget);

  std::vector<Individual> pop;
  pop.reserve(ps);
  std::size_t generated = 0;
  const auto& pool = seed.pool;
  if (!pool.empty()) {
    if (pool.size() >= ps) {
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < ps; ++i) pop.push_back({pool[idx[i]]});
    } else {
      for (std::size_t i = 0; i < ps; ++i) pop.push_back({sample_pool(pool, rng)});
    }
  } else {
    for (std::size_t i = 0; i < ps; ++i) pop.push_back({config::generate_random(schema, rng)});
    generated = ps;
  }

  auto evaluate = [&](Individual& ind) {
    if (ind.evaluated) return true;
    if (!meter.remaining()) return false;
    ind.fitness = meter.evaluate(f, ind.config);
    ind.evaluated = true;
    return true;
  };

  SearchResult out(pop[0].config);
  bool complete = true;
  for (auto& ind : pop) complete = evaluate(ind) && complete;
  if (meter.used() == 0) {
    out.below_one_evaluation = true;
    out.generated = generated;
    return out;
  }
  out.trace.push_back(pop[best_index(pop)].fitness);

  const std::size_t elites = cfg.elite_count();
  std::size_t iteration = 0;
  while (complete && meter.remaining()) {
    std::vector<std::size_t> order(ps);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pop[a].fitness > pop[b].fitness; });
    std::vector<Individual> next;
    next.reserve(ps);
    for (std::size_t i = 0; i < elites; ++i) next.push_back(pop[order[i]]);

    bool aborted = false;
    while (next.size() < ps) {
      const Individual pe1 = tournament(pop, rng);
      const Individual pe2 = tournament(pop, rng);
      EnvConfiguration oe1 = pe1.config;
      EnvConfiguration oe2 = pe2.config;
      if (uniform_real(rng, 0.0, 1.0) < cfg.crossover_rate) {
        auto kids = config::crossover_single_point(oe1, oe2, rng);
        oe1 = std::move(kids.first);
        oe2 = std::move(kids.second);
      }
      Individual o1{mut.apply(oe1, rng)}, o2{mut.apply(oe2, rng)};
      generated += 2;
      if (!evaluate(o1) || !evaluate(o2)) {
        aborted = true;
        break;
      }
      // addBestIndividuals: the best two of parents and offspring, parents
      // first on ties.
      std::array<const Individual*, 4> four{&pe1, &pe2, &o1, &o2};
      std::stable_sort(four.begin(), four.end(),
                       [](const Individual* a, const Individual* b) { return a->fitness > b->fitness; });
      for (std::size_t k = 0; k < 2 && next.size() < ps; ++k) next.push_back(*four[k]);
    }
    // A generation cut short by the budget is discarded.
    if (aborted) break;
    pop = std::move(next);

    if ((iteration + 1) % cfg.reseed_period == 0) {
      std::vector<std::size_t> worst(ps);
      std::iota(worst.begin(), worst.end(), 0);
      std::stable_sort(worst.begin(), worst.end(),
                       [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
      std::vector<Individual> fresh;
      for (std::size_t k = 0; k < cfg.reseed_count(); ++k) {
        if (!pool.empty()) {
          fresh.push_back({sample_pool(pool, rng)});
        } else {
          fresh.push_back({config::generate_random(schema, rng)});
          ++generated;
        }
        if (!evaluate(fresh.back())) {
          aborted = true;
          break;
        }
      }
      if (aborted) break;
      for (std::size_t k = 0; k < fresh.size(); ++k) pop[worst[k]] = std::move(fresh[k]);
    }
    ++iteration;
    out.trace.push_back(pop[best_index(pop)].fitness);
  }

  const auto& best = pop[best_index(pop)];
  out.best = best.config;
  out.fitness = best.fitness;
  out.evals_used = meter.used();
  out.generated = generated;
  return out;
}

SearchResult sampling_search(const Fitness& f, const SchemaPtr& schema, const SearchBudget& budget, Rng& rng) {
  BudgetMeter meter(budget);
  EnvConfiguration first = config::generate_random(schema, rng);
  SearchResult out(first);
  out.generated = 1;
  if (!meter.remaining()) {
    out.below_one_evaluation = true;
    return out;
  }
  out.fitness = meter.evaluate(f, first);
  out.trace.push_back(out.fitness);
  while (meter.remaining()) {
    auto e = config::generate_random(schema, rng);
    ++out.generated;
    const double fe = meter.evaluate(f, e);
    if (fe > out.fitness) {
      out.fitness = fe;
      out.best = std::move(e);
    }
    out.trace.push_back(out.fitness);
  }
  out.evals_used = meter.used();
  return out;
}

const char* to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Random: return "random";
    case Algorithm::Sampling: return "sampling";
    case Algorithm::HillClimbing: return "hc";
    case Algorithm::Genetic: return "ga";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::Random, Algorithm::Sampling, Algorithm::HillClimbing, Algorithm::Genetic})
    if (s == to_string(a)) return a;
  throw ValidationError("unknown algorithm '" + s + "' (random, sampling, hc, ga)");
}

namespace {

const char* mutation_name(const StrategySpec& s) {
  return s.mutation.kind == MutationStrategy::Kind::Saliency ? "saliency" : "random";
}
const char* seed_name(const StrategySpec& s) {
  return s.seed.kind == SeedStrategy::Kind::Failure ? "failure" : "random";
}
bool uses_operators(Algorithm a) { return a == Algorithm::HillClimbing || a == Algorithm::Genetic; }

}  // namespace

std::string StrategySpec::label() const {
  if (!uses_operators(algo)) return to_string(algo);
  return std::string(to_string(algo)) + "-" + mutation_name(*this) + "-" + seed_name(*this);
}

nlohmann::json CampaignResult::to_json() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j = {{"config", config::to_json(e.config)}, {"evals_used", e.evals_used}};
    j["fitness"] = std::isnan(e.fitness) ? nlohmann::json(nullptr) : nlohmann::json(e.fitness);
    if (e.below_one_evaluation) j["below_one_evaluation"] = true;
    entries_json.push_back(std::move(j));
  }
  return {{"strategy", {{"algo", algo}, {"mutation", mutation}, {"seed_kind", seed_kind}, {"params", params}}},
          {"master_seed", master_seed},
          {"entries", std::move(entries_json)}};
}

CampaignResult CampaignResult::from_json(const SchemaPtr& schema, const nlohmann::json& doc) {
  try {
    CampaignResult r;
    const auto& s = doc.at("strategy");
    r.algo = s.at("algo").get<std::string>();
    r.mutation = s.at("mutation").get<std::string>();
    r.seed_kind = s.at("seed_kind").get<std::string>();
    r.params = s.at("params");
    r.master_seed = doc.at("master_seed").get<std::uint64_t>();
    for (const auto& e : doc.at("entries")) {
      const auto& fit = e.at("fitness");
      CampaignEntry entry(config::config_from_json(schema, e.at("config")), fit.is_null() ? nan() : fit.get<double>(),
                          e.at("evals_used").get<std::size_t>());
      entry.below_one_evaluation = e.value("below_one_evaluation", false);
      r.entries.push_back(std::move(entry));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed campaign file: ") + e.what());
  }
}

CampaignResult run_campaign(const StrategySpec& spec, std::size_t count, const Fitness& f, const SchemaPtr& schema,
                            std::uint64_t master_seed, bool parallel) {
  if (count < 1) throw ValidationError("campaign size T must be at least 1");
  if (spec.algo != Algorithm::Random && !f) throw ValidationError("strategy needs a fitness function");
  if (spec.seed.kind == SeedStrategy::Kind::Failure && spec.seed.pool.empty())
    throw ValidationError("failure seeding needs a non-empty failure pool");

  CampaignResult result;
  result.algo = to_string(spec.algo);
  result.mutation = uses_operators(spec.algo) ? mutation_name(spec) : "none";
  result.seed_kind = uses_operators(spec.algo) ? seed_name(spec) : "none";
  result.master_seed = master_seed;
  nlohmann::json params = nlohmann::json::object();
  if (spec.algo != Algorithm::Random) params["budget"] = spec.budget.to_string();
  if (spec.algo == Algorithm::HillClimbing) params["neighborhood"] = spec.neighborhood;
  if (spec.algo == Algorithm::Genetic) {
    params["population_size"] = spec.ga.population_size;
    params["crossover_rate"] = spec.ga.crossover_rate;
    params["elite_fraction"] = spec.ga.elite_fraction;
    params["reseed_period"] = spec.ga.reseed_period;
    params["reseed_fraction"] = spec.ga.reseed_fraction;
  }
  if (spec.seed.kind == SeedStrategy::Kind::Failure && uses_operators(spec.algo))
    params["failure_pool"] = spec.seed.pool.size();
  result.params = std::move(params);

  std::vector<std::optional<CampaignEntry>> slots(count);
  std::exception_ptr failure;
  auto run_one = [&](std::size_t t) {
    Rng rng = derive_rng(master_seed, t);
    SearchResult r = [&]() -> SearchResult {
      switch (spec.algo) {
        case Algorithm::Random: {
          SearchResult r(random_search(schema, rng));
          r.generated = 1;
          return r;
        }
        case Algorithm::Sampling: return sampling_search(f, schema, spec.budget, rng);
        case Algorithm::HillClimbing: {
          std::optional<EnvConfiguration> start;
          if (spec.seed.kind == SeedStrategy::Kind::Failure) start = sample_pool(spec.seed.pool, rng);
          return hill_climb(f, schema, spec.neighborhood, spec.budget, start, spec.mutation, rng);
        }
        case Algorithm::Genetic:
          return genetic_search(f, schema, spec.ga, spec.budget, spec.seed, spec.mutation, rng);
      }
      throw ValidationError("unknown algorithm");
    }();
    CampaignEntry entry(std::move(r.best), r.fitness, r.evals_used);
    entry.below_one_evaluation = r.below_one_evaluation;
    entry.trace = std::move(r.trace);
    slots[t] = std::move(entry);
  };

  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::int64_t t = 0; t < n; ++t) {
    try {
      run_one(static_cast<std::size_t>(t));
    } catch (...) {
#pragma omp critical(failsearch_campaign_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& s : slots) result.entries.push_back(std::move(*s));
  return result;
}

}  // namespace failsearch::search
