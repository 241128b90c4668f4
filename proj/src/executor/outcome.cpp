#include "failsearch/config/json_io.hpp"
#include "failsearch/error.hpp"
#include "failsearch/executor.hpp"

#include <chrono>

namespace failsearch::exec {

using nlohmann::json;

void Trajectory::check() const {
  if (samples.empty()) throw ValidationError("trajectory has no samples");
  for (const auto& s : samples)
    if (s.size() != samples.front().size()) throw ValidationError("trajectory samples differ in width");
}

bool is_failure(const ExecutionOutcome& outcome) { return outcome.failure_probability > 0.5; }

json ExecutionOutcome::to_json() const {
  json trajs = json::array();
  for (const auto& t : trajectories) trajs.push_back(t.samples);
  json flags = json::array();
  for (bool f : run_failed) flags.push_back(f);
  json doc = {{"config", config::to_json(config)},
              {"runs", runs},
              {"failures", failures},
              {"failure_probability", failure_probability},
              {"run_failed", std::move(flags)},
              {"seeds", seeds},
              {"trajectories", std::move(trajs)}};
  if (invalid_runs > 0) {
    doc["invalid_runs"] = invalid_runs;
    doc["errors"] = errors;
  }
  return doc;
}

ExecutionOutcome ExecutionOutcome::from_json(const config::SchemaPtr& schema, const json& doc) {
  try {
    ExecutionOutcome o{config::config_from_json(schema, doc.at("config"))};
    o.runs = doc.at("runs").get<int>();
    o.failures = doc.at("failures").get<int>();
    o.failure_probability = doc.at("failure_probability").get<double>();
    for (const auto& f : doc.at("run_failed")) o.run_failed.push_back(f.get<bool>());
    o.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& t : doc.at("trajectories"))
      o.trajectories.push_back({t.get<std::vector<std::vector<double>>>()});
    o.invalid_runs = doc.value("invalid_runs", 0);
    if (doc.contains("errors")) o.errors = doc.at("errors").get<std::vector<std::string>>();
    if (o.runs != static_cast<int>(o.trajectories.size()) || o.runs != static_cast<int>(o.run_failed.size()))
      throw ValidationError("outcome run count does not match its trajectories");
    return o;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed outcome: ") + e.what());
  }
}

ExecutionOutcome execute(SystemUnderTest& sut, const EnvConfiguration& config, int runs, std::uint64_t seed) {
  if (runs < 1) throw ValidationError("runs per configuration must be at least 1");
  ExecutionOutcome out{config};
  std::exception_ptr first_error;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t run_seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    out.seeds.push_back(run_seed);
    try {
      auto result = sut.run(config, run_seed, r);
      result.trajectory.check();
      out.failures += result.failure ? 1 : 0;
      out.run_failed.push_back(result.failure);
      out.trajectories.push_back(std::move(result.trajectory));
      ++out.runs;
    } catch (const ExecutionError& e) {
      if (!first_error) first_error = std::current_exception();
      ++out.invalid_runs;
      out.errors.push_back(e.what());
    }
  }
  if (out.runs == 0) std::rethrow_exception(first_error);
  out.failure_probability = static_cast<double>(out.failures) / static_cast<double>(out.runs);
  return out;
}

std::string SutDescriptor::name() const {
  switch (kind) {
    case Kind::Synthetic: return "synthetic";
    case Kind::ToyParking: return "parking";
    case Kind::External: return "exec";
  }
  return "?";
}

json SutDescriptor::to_json() const {
  return {{"kind", name()}, {"deterministic", deterministic}, {"runs_per_config", runs_per_config}, {"params", params}};
}

std::unique_ptr<SystemUnderTest> instantiate(const SutDescriptor& d, const config::SchemaPtr& schema) {
  switch (d.kind) {
    case SutDescriptor::Kind::Synthetic:
      return std::make_unique<SyntheticSut>(schema, SyntheticParams::from_json(d.params));
    case SutDescriptor::Kind::ToyParking:
      return std::make_unique<ToyParkingSut>(ParkingParams::from_json(d.params));
    case SutDescriptor::Kind::External: {
      auto sut = std::make_unique<ExternalSut>(d.params.at("command").get<std::string>(),
                                               std::chrono::milliseconds(d.params.at("timeout_ms").get<long>()));
      return sut;
    }
  }
  throw ValidationError("unknown SUT kind");
}

}  // namespace failsearch::exec
