#include "failsearch/config/operators.hpp"
#include "failsearch/error.hpp"
#include "failsearch/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace failsearch::exec {

using nlohmann::json;

namespace {

constexpr std::uint64_t kWeightStream = 0x5EED0001;
constexpr std::uint64_t kSampleStream = 0x5EED0002;
constexpr int kTrajectorySteps = 20;

json real_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double real_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ValidationError("bad real value '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

double SyntheticParams::g(const std::vector<double>& x) const {
  if (x.size() != weights.size()) throw SchemaMismatch("feature width does not match the synthetic SUT");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += weights[k] * (x[k] - mean[k]) / scale[k];
  const double za = (x[a] - mean[a]) / scale[a];
  const double zb = (x[b] - mean[b]) / scale[b];
  return s + c * za * zb;
}

json SyntheticParams::to_json() const {
  return {{"weights", weights}, {"mean", mean},   {"scale", scale},           {"a", a},
          {"b", b},             {"c", c},         {"theta", real_json(theta)}, {"noise", noise}};
}

SyntheticParams SyntheticParams::from_json(const json& doc) {
  try {
    SyntheticParams p;
    p.weights = doc.at("weights").get<std::vector<double>>();
    p.mean = doc.at("mean").get<std::vector<double>>();
    p.scale = doc.at("scale").get<std::vector<double>>();
    p.a = doc.at("a").get<std::size_t>();
    p.b = doc.at("b").get<std::size_t>();
    p.c = doc.at("c").get<double>();
    p.theta = real_from(doc.at("theta"));
    p.noise = doc.at("noise").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed synthetic SUT parameters: ") + e.what());
  }
}

SyntheticParams default_synthetic_params(const config::SchemaPtr& schema, double failure_rate, double noise,
                                         std::size_t samples) {
  if (!(failure_rate > 0.0 && failure_rate < 1.0)) throw ValidationError("failure rate must lie in (0, 1)");
  const std::size_t w = schema->encoded_width();
  SyntheticParams p;
  p.noise = noise;
  p.a = 0;
  p.b = std::min<std::size_t>(1, w - 1);
  Rng wrng(kWeightStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  p.weights.resize(w);
  for (auto& x : p.weights) x = normal(wrng);
  p.c = 1.5;

  Rng srng(kSampleStream);
  std::vector<std::vector<double>> xs;
  xs.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) xs.push_back(config::encode(config::generate_random(schema, srng)));
  p.mean.assign(w, 0.0);
  p.scale.assign(w, 0.0);
  for (const auto& x : xs)
    for (std::size_t k = 0; k < w; ++k) p.mean[k] += x[k];
  for (auto& m : p.mean) m /= static_cast<double>(samples);
  for (const auto& x : xs)
    for (std::size_t k = 0; k < w; ++k) p.scale[k] += (x[k] - p.mean[k]) * (x[k] - p.mean[k]);
  for (auto& s : p.scale) {
    s = std::sqrt(s / static_cast<double>(samples));
    if (!(s > 1e-12)) s = 1.0;
  }

  std::vector<double> g(samples);
  for (std::size_t i = 0; i < samples; ++i) g[i] = p.g(xs[i]);
  std::sort(g.begin(), g.end());
  const auto q = static_cast<std::size_t>(std::floor((1.0 - failure_rate) * static_cast<double>(samples)));
  p.theta = g[std::min(q, samples - 1)];
  return p;
}

SyntheticSut::SyntheticSut(config::SchemaPtr schema, SyntheticParams params)
    : schema_(std::move(schema)), params_(std::move(params)) {
  const auto w = schema_->encoded_width();
  if (params_.weights.size() != w || params_.mean.size() != w || params_.scale.size() != w || params_.a >= w ||
      params_.b >= w)
    throw ValidationError("synthetic SUT parameters do not match the schema encoding");
  if (!std::isfinite(params_.c) || std::isnan(params_.theta) || !(params_.noise >= 0.0 && params_.noise <= 1.0))
    throw ValidationError("synthetic SUT parameters must be finite with noise in [0, 1]");
  for (std::size_t k = 0; k < w; ++k)
    if (!std::isfinite(params_.weights[k]) || !std::isfinite(params_.mean[k]) || !(params_.scale[k] > 0.0))
      throw ValidationError("synthetic SUT weights and scales must be finite");
  descriptor_ = synthetic_sut(params_);
}

bool SyntheticSut::ground_truth(const EnvConfiguration& config) const {
  return params_.g(config::encode(config)) > params_.theta;
}

RunResult SyntheticSut::run(const EnvConfiguration& config, std::uint64_t seed, int) {
  const double g = params_.g(config::encode(config));
  bool failure = g > params_.theta;
  if (params_.noise > 0.0) {
    Rng rng(seed);
    if (bernoulli(rng, params_.noise)) failure = !failure;
  }
  // Margin is clamped so infinite thresholds still give finite samples.
  const double margin = std::clamp(g - params_.theta, -1e6, 1e6);
  RunResult r{failure, {}};
  for (int t = 0; t < kTrajectorySteps; ++t) r.trajectory.samples.push_back({margin * std::exp(-0.2 * t)});
  return r;
}

SutDescriptor synthetic_sut(const SyntheticParams& params) {
  SutDescriptor d;
  d.kind = SutDescriptor::Kind::Synthetic;
  d.deterministic = params.noise == 0.0;
  d.runs_per_config = d.deterministic ? 1 : 10;
  d.params = params.to_json();
  return d;
}

}  // namespace failsearch::exec
