#pragma once

#include "failsearch/config/schema.hpp"

#include <span>
#include <string>
#include <vector>

namespace failsearch::config {

enum class Provenance { Random, TrainingFailure, Mutated, Crossover };

const char* to_string(Provenance p) noexcept;

// One point in a configuration space. Construction checks arity and kinds
// against the schema; semantic validity is checked by validate().
class EnvConfiguration {
public:
  EnvConfiguration(SchemaPtr schema, std::vector<ParameterValue> values,
                   Provenance provenance = Provenance::Random);

  const ConfigSchema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  const std::vector<ParameterValue>& values() const noexcept { return values_; }
  const ParameterValue& value(std::size_t i) const { return values_.at(i); }
  Provenance provenance() const noexcept { return provenance_; }

  EnvConfiguration with_value(std::size_t i, ParameterValue v, Provenance p) const;
  EnvConfiguration with_provenance(Provenance p) const;

  std::string to_string() const;

  // Value equality; provenance is bookkeeping and does not participate.
  friend bool operator==(const EnvConfiguration& a, const EnvConfiguration& b) {
    return a.schema_->name() == b.schema_->name() && a.values_ == b.values_;
  }

private:
  SchemaPtr schema_;
  std::vector<ParameterValue> values_;
  Provenance provenance_;
};

// Throws SchemaMismatch when the value list does not fit the schema.
void check_shape(const ConfigSchema& schema, std::span<const ParameterValue> values);

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

ValidationResult validate(const EnvConfiguration& config, const ConfigSchema& schema);
inline ValidationResult validate(const EnvConfiguration& config) {
  return validate(config, config.schema());
}
bool is_valid(const EnvConfiguration& config);

using FeatureVector = std::vector<double>;

FeatureVector encode(const EnvConfiguration& config);
EnvConfiguration decode(const SchemaPtr& schema, std::span<const double> features,
                        Provenance provenance = Provenance::Random);

}  // namespace failsearch::config
