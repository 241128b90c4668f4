#pragma once

#include "failsearch/config/configuration.hpp"
#include "failsearch/random.hpp"

#include <optional>
#include <utility>

namespace failsearch::config {

EnvConfiguration generate_random(const SchemaPtr& schema, Rng& rng);

// Changes one uniformly chosen parameter with its kind-specific operator.
// Invalid proposals are redrawn up to the schema's mutation retry cap; on
// exhaustion the input comes back unchanged.
EnvConfiguration mutate_random(const EnvConfiguration& config, Rng& rng);

// A mutation target: which parameter, which way, and (when the choice came
// from a feature attribution) which feature inside the parameter's span.
struct DirectedMove {
  std::size_t param_index = 0;
  int direction = +1;
  std::optional<std::size_t> feature_offset;
};

EnvConfiguration mutate_directed(const EnvConfiguration& config, const DirectedMove& move, Rng& rng);

// Raw single-point exchange: positions >= cut come from the other parent.
// No validity filtering; see crossover_single_point for the checked operator.
std::pair<EnvConfiguration, EnvConfiguration> splice_at(const EnvConfiguration& a,
                                                        const EnvConfiguration& b, std::size_t cut);

// Cut drawn uniformly from [1, positions-1]. Retries up to the schema's
// crossover retry count; returns the parents if no attempt yields two
// valid children.
std::pair<EnvConfiguration, EnvConfiguration> crossover_single_point(const EnvConfiguration& a,
                                                                     const EnvConfiguration& b,
                                                                     Rng& rng);

}  // namespace failsearch::config
