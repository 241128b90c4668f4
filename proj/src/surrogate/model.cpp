#include "failsearch/error.hpp"
#include "failsearch/surrogate.hpp"

#include <cmath>
#include <fstream>

namespace failsearch::surrogate {

using nlohmann::json;

namespace {

constexpr double kBnEps = 1e-5;

void he_uniform(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.cols));
  for (auto& x : w.data) x = uniform_real(rng, -limit, limit);
}

json matrix_json(const Matrix& m) { return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw ValidationError("model matrix size does not match its shape");
  return m;
}

double stable_p1(double l0, double l1) { return 1.0 / (1.0 + std::exp(l0 - l1)); }

}  // namespace

void Architecture::check() const {
  if (input_width == 0) throw ValidationError("input width must be positive");
  if (hidden_layers < 1 || hidden_layers > 4) throw ValidationError("hidden layers must lie in [1, 4]");
  if (hidden_units == 0) throw ValidationError("hidden units must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
}

Model Model::initialize(const Architecture& arch, Rng& rng) {
  arch.check();
  Model m;
  m.arch = arch;
  m.input_mean.assign(arch.input_width, 0.0);
  m.input_scale.assign(arch.input_width, 1.0);
  std::size_t fan_in = arch.input_width;
  for (int l = 0; l < arch.hidden_layers; ++l) {
    HiddenLayer h;
    h.weight = Matrix(arch.hidden_units, fan_in);
    he_uniform(h.weight, rng);
    h.bias.assign(arch.hidden_units, 0.0);
    if (arch.batchnorm) {
      h.gamma.assign(arch.hidden_units, 1.0);
      h.beta.assign(arch.hidden_units, 0.0);
      h.running_mean.assign(arch.hidden_units, 0.0);
      h.running_var.assign(arch.hidden_units, 1.0);
    }
    m.hidden.push_back(std::move(h));
    fan_in = arch.hidden_units;
  }
  m.out_weight = Matrix(2, fan_in);
  he_uniform(m.out_weight, rng);
  m.out_bias.assign(2, 0.0);
  return m;
}

void Model::check_width(std::size_t w) const {
  if (w != arch.input_width)
    throw SchemaMismatch("feature width " + std::to_string(w) + " does not match model input width " +
                         std::to_string(arch.input_width));
}

Matrix Model::forward_inference(const Matrix& x) const {
  check_width(x.cols);
  Matrix h(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t k = 0; k < x.cols; ++k) h(r, k) = (x(r, k) - input_mean[k]) / input_scale[k];
  Matrix z;
  for (const auto& layer : hidden) {
    kernels::affine(h, layer.weight, layer.bias, z);
    for (std::size_t r = 0; r < z.rows; ++r)
      for (std::size_t u = 0; u < z.cols; ++u) {
        double v = z(r, u);
        if (arch.batchnorm)
          v = layer.gamma[u] * (v - layer.running_mean[u]) / std::sqrt(layer.running_var[u] + kBnEps) + layer.beta[u];
        z(r, u) = std::tanh(v);
      }
    std::swap(h, z);
  }
  Matrix logits;
  kernels::affine(h, out_weight, out_bias, logits);
  return logits;
}

std::pair<double, double> Model::probabilities(std::span<const double> features) const {
  Matrix x(1, features.size());
  std::copy(features.begin(), features.end(), x.data.begin());
  const auto logits = forward_inference(x);
  const double p1 = stable_p1(logits(0, 0), logits(0, 1));
  const double p0 = 1.0 / (1.0 + std::exp(logits(0, 1) - logits(0, 0)));
  return {p0, p1};
}

double Model::predict(std::span<const double> features) const { return probabilities(features).second; }

std::vector<double> Model::predict_batch(const Matrix& features) const {
  const auto logits = forward_inference(features);
  std::vector<double> out(features.rows);
  for (std::size_t r = 0; r < features.rows; ++r) out[r] = stable_p1(logits(r, 0), logits(r, 1));
  return out;
}

std::vector<double> Model::saliency(std::span<const double> features) const {
  check_width(features.size());
  // Forward pass keeping per-layer activations and batchnorm scales.
  std::vector<std::vector<double>> acts;
  std::vector<double> h(features.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = (features[k] - input_mean[k]) / input_scale[k];
  std::vector<std::vector<double>> bn_scale;
  for (const auto& layer : hidden) {
    std::vector<double> a(layer.weight.rows), s(layer.weight.rows, 1.0);
    for (std::size_t u = 0; u < a.size(); ++u) {
      double v = layer.bias[u];
      for (std::size_t k = 0; k < h.size(); ++k) v += layer.weight(u, k) * h[k];
      if (arch.batchnorm) {
        s[u] = layer.gamma[u] / std::sqrt(layer.running_var[u] + kBnEps);
        v = s[u] * (v - layer.running_mean[u]) + layer.beta[u];
      }
      a[u] = std::tanh(v);
    }
    bn_scale.push_back(std::move(s));
    acts.push_back(a);
    h = std::move(a);
  }
  double l0 = out_bias[0], l1 = out_bias[1];
  for (std::size_t k = 0; k < h.size(); ++k) {
    l0 += out_weight(0, k) * h[k];
    l1 += out_weight(1, k) * h[k];
  }
  const double p1 = stable_p1(l0, l1);
  const double p0 = 1.0 / (1.0 + std::exp(l1 - l0));
  const double dl1 = p0 * p1;  // d p1 / d l1; d p1 / d l0 = -dl1

  std::vector<double> g(h.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = dl1 * (out_weight(1, k) - out_weight(0, k));
  for (std::size_t l = hidden.size(); l-- > 0;) {
    const auto& layer = hidden[l];
    std::vector<double> dz(layer.weight.rows);
    for (std::size_t u = 0; u < dz.size(); ++u)
      dz[u] = g[u] * (1.0 - acts[l][u] * acts[l][u]) * bn_scale[l][u];
    std::vector<double> prev(layer.weight.cols, 0.0);
    for (std::size_t u = 0; u < dz.size(); ++u)
      for (std::size_t k = 0; k < prev.size(); ++k) prev[k] += dz[u] * layer.weight(u, k);
    g = std::move(prev);
  }
  for (std::size_t k = 0; k < g.size(); ++k) g[k] /= input_scale[k];
  return g;
}

double Model::loss(const Matrix& features, const std::vector<int>& labels, const data::ClassWeights& w) const {
  if (features.rows == 0) return 0.0;
  const auto logits = forward_inference(features);
  double num = 0.0, den = 0.0;
  for (std::size_t r = 0; r < features.rows; ++r) {
    const double l0 = logits(r, 0), l1 = logits(r, 1);
    const double m = std::max(l0, l1);
    const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    const double wc = labels[r] == 1 ? w.w1 : w.w0;
    num += wc * (lse - (labels[r] == 1 ? l1 : l0));
    den += wc;
  }
  return num / den;
}

json Model::to_json() const {
  json layers = json::array();
  for (const auto& h : hidden) {
    json l = {{"weight", matrix_json(h.weight)}, {"bias", h.bias}};
    if (arch.batchnorm) {
      l["gamma"] = h.gamma;
      l["beta"] = h.beta;
      l["running_mean"] = h.running_mean;
      l["running_var"] = h.running_var;
    }
    layers.push_back(std::move(l));
  }
  return {
      {"version", "surrogate-v1"},
      {"architecture",
       {{"input_width", arch.input_width},
        {"hidden_layers", arch.hidden_layers},
        {"hidden_units", arch.hidden_units},
        {"dropout", arch.dropout},
        {"batchnorm", arch.batchnorm}}},
      {"standardize", {{"mean", input_mean}, {"scale", input_scale}}},
      {"hidden", std::move(layers)},
      {"output", {{"weight", matrix_json(out_weight)}, {"bias", out_bias}}},
      {"training",
       {{"epochs_run", info.epochs_run},
        {"best_epoch", info.best_epoch},
        {"best_val_loss", info.best_val_loss},
        {"seed", info.seed},
        {"train_loss", info.train_loss},
        {"val_loss", info.val_loss}}},
  };
}

Model Model::from_json(const json& doc) {
  try {
    if (doc.at("version") != "surrogate-v1") throw ValidationError("unsupported model version");
    Model m;
    const auto& a = doc.at("architecture");
    m.arch.input_width = a.at("input_width").get<std::size_t>();
    m.arch.hidden_layers = a.at("hidden_layers").get<int>();
    m.arch.hidden_units = a.at("hidden_units").get<std::size_t>();
    m.arch.dropout = a.at("dropout").get<double>();
    m.arch.batchnorm = a.at("batchnorm").get<bool>();
    m.arch.check();
    m.input_mean = doc.at("standardize").at("mean").get<std::vector<double>>();
    m.input_scale = doc.at("standardize").at("scale").get<std::vector<double>>();
    for (const auto& l : doc.at("hidden")) {
      HiddenLayer h;
      h.weight = matrix_from(l.at("weight"));
      h.bias = l.at("bias").get<std::vector<double>>();
      if (m.arch.batchnorm) {
        h.gamma = l.at("gamma").get<std::vector<double>>();
        h.beta = l.at("beta").get<std::vector<double>>();
        h.running_mean = l.at("running_mean").get<std::vector<double>>();
        h.running_var = l.at("running_var").get<std::vector<double>>();
      }
      m.hidden.push_back(std::move(h));
    }
    m.out_weight = matrix_from(doc.at("output").at("weight"));
    m.out_bias = doc.at("output").at("bias").get<std::vector<double>>();
    const auto& t = doc.at("training");
    m.info.epochs_run = t.at("epochs_run").get<int>();
    m.info.best_epoch = t.at("best_epoch").get<int>();
    m.info.best_val_loss = t.at("best_val_loss").get<double>();
    m.info.seed = t.at("seed").get<std::uint64_t>();
    m.info.train_loss = t.at("train_loss").get<std::vector<double>>();
    m.info.val_loss = t.at("val_loss").get<std::vector<double>>();

    if (static_cast<int>(m.hidden.size()) != m.arch.hidden_layers || m.input_mean.size() != m.arch.input_width ||
        m.input_scale.size() != m.arch.input_width || m.out_weight.rows != 2 || m.out_bias.size() != 2)
      throw ValidationError("model tensors do not match the architecture");
    std::size_t fan_in = m.arch.input_width;
    for (const auto& h : m.hidden) {
      if (h.weight.rows != m.arch.hidden_units || h.weight.cols != fan_in || h.bias.size() != h.weight.rows)
        throw ValidationError("hidden layer shape does not match the architecture");
      fan_in = h.weight.rows;
    }
    if (m.out_weight.cols != fan_in) throw ValidationError("output layer shape does not match the architecture");
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model " + path.string());
  out << to_json().dump(1) << '\n';
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("model " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

double predict_failure(const Model& model, std::span<const double> features) { return model.predict(features); }

std::vector<double> saliency(const Model& model, std::span<const double> features) {
  return model.saliency(features);
}

config::DirectedMove saliency_to_parameter(std::span<const double> gradient, const config::ConfigSchema& schema) {
  if (gradient.size() != schema.encoded_width())
    throw SchemaMismatch("gradient width does not match the schema encoding");
  std::size_t best = 0;
  for (std::size_t k = 1; k < gradient.size(); ++k)
    if (std::abs(gradient[k]) > std::abs(gradient[best])) best = k;
  const std::size_t param = schema.owner_of_feature(best);
  return {param, gradient[best] < 0.0 ? -1 : +1, best - schema.layout()[param].start};
}

ClassifierMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  ClassifierMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  if (tp + fp == 0)
    m.precision_undefined = true;
  else
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0)
    m.recall_undefined = true;
  else
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return m;
}

ClassifierMetrics precision_recall(const Model& model, const data::InteractionDataset& test_set, double threshold) {
  if (test_set.empty()) throw DegenerateData("precision/recall need a non-empty test set");
  const auto p = model.predict_batch(features_of(test_set));
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pos = p[i] > threshold;
    const bool actual = test_set[i].label == 1;
    tp += pos && actual;
    fp += pos && !actual;
    fn += !pos && actual;
    tn += !pos && !actual;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

Selection select_model(std::span<const Candidate> candidates, double recall_floor) {
  if (candidates.empty()) throw DegenerateData("no candidate models to select from");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.recall < recall_floor) continue;
    if (!best || c.precision > candidates[*best].precision ||
        (c.precision == candidates[*best].precision && c.recall > candidates[*best].recall))
      best = i;
  }
  if (best) return {*best, false};
  std::size_t arg = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].recall > candidates[arg].recall) arg = i;
  return {arg, true};
}

}  // namespace failsearch::surrogate
