#pragma once

#include "failsearch/config/configuration.hpp"
#include "failsearch/random.hpp"

#include <filesystem>
#include <iosfwd>
#include <tuple>
#include <vector>

namespace failsearch::data {

struct Record {
  std::int64_t episode = 0;
  config::EnvConfiguration config;
  int label = 0;
};

// Ordered interaction log: one (configuration, failure label) pair per episode.
class InteractionDataset {
public:
  explicit InteractionDataset(config::SchemaPtr schema, std::vector<Record> records = {});

  const config::SchemaPtr& schema() const noexcept { return schema_; }
  const std::vector<Record>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }

  std::vector<int> labels() const;
  std::size_t count(int label) const;
  // Configurations of all records with the given label, in file order.
  std::vector<config::EnvConfiguration> configs_with_label(int label) const;

private:
  config::SchemaPtr schema_;
  std::vector<Record> records_;
};

InteractionDataset load(const config::SchemaPtr& schema, const std::filesystem::path& path);
InteractionDataset read_jsonl(const config::SchemaPtr& schema, std::istream& in);
void write_jsonl(const InteractionDataset& d, std::ostream& out);

// Drops the first floor(fraction * N) records.
InteractionDataset filter_initial(const InteractionDataset& d, double fraction);

struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;
};

// w_c = N / (2 * count(c)).
ClassWeights class_weights(const std::vector<int>& labels);

struct Split {
  InteractionDataset train;
  InteractionDataset val;
  InteractionDataset test;
};

// Stratified random partition. Each label stratum gives
// floor(fraction * n_c) records to val and test; the remainder goes to train.
// Records keep their relative file order within every part.
Split split(const InteractionDataset& d, double val_fraction, double test_fraction, Rng& rng);

}  // namespace failsearch::data
