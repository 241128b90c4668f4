#include "failsearch/dataset.hpp"

#include "failsearch/config/json_io.hpp"
#include "failsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace failsearch::data {

using nlohmann::json;

InteractionDataset::InteractionDataset(config::SchemaPtr schema, std::vector<Record> records)
    : schema_(std::move(schema)), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.label != 0 && r.label != 1)
      throw ValidationError("episode " + std::to_string(r.episode) + ": label must be 0 or 1");
    if (i > 0 && r.episode <= records_[i - 1].episode)
      throw ValidationError("episode " + std::to_string(r.episode) + ": episode indices must increase");
  }
}

std::vector<int> InteractionDataset::labels() const {
  std::vector<int> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.label);
  return out;
}

std::size_t InteractionDataset::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const Record& r) { return r.label == label; }));
}

std::vector<config::EnvConfiguration> InteractionDataset::configs_with_label(int label) const {
  std::vector<config::EnvConfiguration> out;
  for (const auto& r : records_)
    if (r.label == label) out.push_back(r.config);
  return out;
}

InteractionDataset read_jsonl(const config::SchemaPtr& schema, std::istream& in) {
  std::vector<Record> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    if (!doc.is_object() || !doc.contains("episode") || !doc.contains("config") || !doc.contains("failure"))
      throw ParseError(lineno, "record needs episode, config and failure");
    const auto& ep = doc["episode"];
    const auto& fl = doc["failure"];
    if (!ep.is_number_integer()) throw ParseError(lineno, "episode must be an integer");
    int label = -1;
    if (fl.is_boolean())
      label = fl.get<bool>() ? 1 : 0;
    else if (fl.is_number_integer())
      label = fl.get<int>();
    if (label != 0 && label != 1) throw ParseError(lineno, "failure must be 0 or 1");
    const auto episode = ep.get<std::int64_t>();
    if (!records.empty() && episode <= records.back().episode)
      throw ParseError(lineno, "episode indices must increase");

    const std::string who = "episode " + std::to_string(episode);
    std::optional<config::EnvConfiguration> cfg;
    try {
      cfg = config::config_from_json(schema, doc["config"],
                                     label == 1 ? config::Provenance::TrainingFailure
                                                : config::Provenance::Random);
    } catch (const Error& e) {
      throw ValidationError(who + ": " + e.what());
    }
    if (auto v = config::validate(*cfg); !v.ok()) {
      std::string names;
      for (const auto& n : v.violations) names += (names.empty() ? "" : ", ") + n;
      throw ValidationError(who + ": violates " + names);
    }
    records.push_back({episode, std::move(*cfg), label});
  }
  return InteractionDataset(schema, std::move(records));
}

InteractionDataset load(const config::SchemaPtr& schema, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return read_jsonl(schema, in);
}

void write_jsonl(const InteractionDataset& d, std::ostream& out) {
  for (const auto& r : d.records()) {
    json doc;
    doc["episode"] = r.episode;
    doc["config"] = config::to_json(r.config);
    doc["failure"] = r.label;
    out << doc.dump() << '\n';
  }
}

InteractionDataset filter_initial(const InteractionDataset& d, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ValidationError("filter fraction must lie in [0, 1]");
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d.size()) + 1e-9));
  std::vector<Record> kept(d.records().begin() + static_cast<std::ptrdiff_t>(std::min(drop, d.size())),
                           d.records().end());
  return InteractionDataset(d.schema(), std::move(kept));
}

ClassWeights class_weights(const std::vector<int>& labels) {
  std::size_t n1 = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
    n1 += static_cast<std::size_t>(l);
  }
  const std::size_t n0 = labels.size() - n1;
  if (n0 == 0 || n1 == 0) throw DegenerateData("class weights need both classes present");
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
}

Split split(const InteractionDataset& d, double val_fraction, double test_fraction, Rng& rng) {
  if (!(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0))
    throw ValidationError("split fractions must be non-negative with sum below 1");

  // 0 = train, 1 = val, 2 = test
  std::vector<int> part(d.size(), 0);
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i].label == label) idx.push_back(i);
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    const auto nv = static_cast<std::size_t>(std::floor(val_fraction * n + 1e-9));
    const auto nt = static_cast<std::size_t>(std::floor(test_fraction * n + 1e-9));
    if ((val_fraction > 0.0 && nv == 0) || (test_fraction > 0.0 && nt == 0))
      throw DegenerateData("class " + std::to_string(label) + " has too few records (" +
                           std::to_string(idx.size()) + ") to populate every split");
    for (std::size_t k = 0; k < nv; ++k) part[idx[k]] = 1;
    for (std::size_t k = nv; k < nv + nt; ++k) part[idx[k]] = 2;
  }

  std::vector<Record> parts[3];
  for (std::size_t i = 0; i < d.size(); ++i) parts[part[i]].push_back(d[i]);
  return {InteractionDataset(d.schema(), std::move(parts[0])), InteractionDataset(d.schema(), std::move(parts[1])),
          InteractionDataset(d.schema(), std::move(parts[2]))};
}

}  // namespace failsearch::data
