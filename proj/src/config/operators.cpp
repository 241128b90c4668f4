#include "failsearch/config/operators.hpp"

#include "failsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace failsearch::config {

namespace {

int random_sign(Rng& rng) { return coin(rng) ? +1 : -1; }

double draw_step(Rng& rng, const RealRange& step) {
  return step.high_open ? uniform_real(rng, step.low, step.high)
                        : uniform_real_closed(rng, step.low, step.high);
}

// k distinct elements of `pool`, in draw order.
template <typename T>
std::vector<T> sample_distinct(std::vector<T> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i),
                                                        static_cast<std::int64_t>(pool.size() - 1)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<int> non_members(const IndexSet& s, int universe) {
  std::vector<int> out;
  for (int m = 1; m <= universe; ++m)
    if (!s.contains(m)) out.push_back(m);
  return out;
}

ParameterValue generate_value(const ParameterSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& d) -> ParameterValue {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, DiscreteIntSpec>) {
          return uniform_int(rng, d.range.low, d.range.high);
        } else if constexpr (std::is_same_v<T, ContinuousSpec>) {
          return d.range.high_open ? uniform_real(rng, d.range.low, d.range.high)
                                   : uniform_real_closed(rng, d.range.low, d.range.high);
        } else if constexpr (std::is_same_v<T, IndexSetSpec>) {
          const auto n = uniform_int(rng, d.generate_size.low, d.generate_size.high);
          std::vector<int> all(static_cast<std::size_t>(d.universe));
          std::iota(all.begin(), all.end(), 1);
          auto picked = sample_distinct(std::move(all), static_cast<std::size_t>(n), rng);
          return IndexSet(picked.begin(), picked.end());
        } else if constexpr (std::is_same_v<T, FloatTupleSpec>) {
          RealVector v;
          for (const auto& c : d.coords)
            v.push_back(c.high_open ? uniform_real(rng, c.low, c.high) : uniform_real_closed(rng, c.low, c.high));
          return v;
        } else if constexpr (std::is_same_v<T, PerturbationSpec>) {
          RealVector v;
          for (double b : d.base) v.push_back(b + uniform_real_closed(rng, -d.half_width, d.half_width));
          return v;
        } else {
          auto draw_value = [&](const std::string& name) {
            const auto* c = d.find(name);
            if (c->integral) {
              const auto lo = static_cast<std::int64_t>(std::ceil(c->generate.low));
              const auto hi = static_cast<std::int64_t>(std::floor(c->generate.high));
              return static_cast<double>(uniform_int(rng, lo, std::max(lo, hi)));
            }
            return uniform_real_closed(rng, c->generate.low, c->generate.high);
          };
          auto pick = [&](const std::vector<std::string>& names) {
            return names[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(names.size()) - 1))];
          };
          CommandList list;
          if (d.straight.empty() || d.curve_marker.empty() || d.turns.empty()) {
            std::vector<std::string> names;
            for (const auto& c : d.commands) names.push_back(c.name);
            for (std::size_t i = 0; i < d.length; ++i) {
              auto name = pick(names);
              list.push_back({name, draw_value(name)});
            }
            return list;
          }
          // Straight framing with (marker, turn) pairs in between.
          list.push_back({d.straight, draw_value(d.straight)});
          std::size_t i = 1;
          while (i + 1 < d.length) {
            if (i + 2 < d.length && coin(rng)) {
              list.push_back({d.curve_marker, draw_value(d.curve_marker)});
              auto turn = pick(d.turns);
              list.push_back({turn, draw_value(turn)});
              i += 2;
            } else {
              list.push_back({d.straight, draw_value(d.straight)});
              i += 1;
            }
          }
          list.push_back({d.straight, draw_value(d.straight)});
          return list;
        }
      },
      spec.detail);
}

// One kind-specific proposal. direction == 0 means the sign is drawn.
std::optional<ParameterValue> propose(const ParameterSpec& spec, const ParameterValue& current, int direction,
                                      std::optional<std::size_t> offset, Rng& rng) {
  auto sign = [&] { return direction != 0 ? direction : random_sign(rng); };
  return std::visit(
      [&](const auto& d) -> std::optional<ParameterValue> {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, DiscreteIntSpec>) {
          const auto s = sign();
          return std::get<std::int64_t>(current) + s * uniform_int(rng, d.step.low, d.step.high);
        } else if constexpr (std::is_same_v<T, ContinuousSpec>) {
          const auto s = sign();
          return std::get<double>(current) + s * draw_step(rng, d.step);
        } else if constexpr (std::is_same_v<T, IndexSetSpec>) {
          IndexSet set = std::get<IndexSet>(current);
          if (direction != 0 && offset) {
            const int member = static_cast<int>(*offset) + 1;
            if (direction > 0 ? set.contains(member) : !set.contains(member)) return std::nullopt;
            if (direction > 0)
              set.insert(member);
            else
              set.erase(member);
            return set;
          }
          const bool membership = direction != 0 || coin(rng);
          const auto k = static_cast<std::size_t>(uniform_int(rng, d.pick_count.low, d.pick_count.high));
          if (membership) {
            const bool add = direction != 0 ? direction > 0 : coin(rng);
            if (add) {
              auto pool = non_members(set, d.universe);
              if (pool.empty()) return std::nullopt;
              for (int m : sample_distinct(std::move(pool), k, rng)) set.insert(m);
            } else {
              if (set.empty()) return std::nullopt;
              for (int m : sample_distinct(std::vector<int>(set.begin(), set.end()), k, rng)) set.erase(m);
            }
            return set;
          }
          if (set.empty()) return std::nullopt;
          auto moved = sample_distinct(std::vector<int>(set.begin(), set.end()), k, rng);
          for (int m : moved) set.erase(m);
          for (int m : moved) {
            const int target = m + random_sign(rng) * static_cast<int>(uniform_int(rng, d.shift_step.low, d.shift_step.high));
            if (!set.insert(target).second) return std::nullopt;  // collided with another member
          }
          return set;
        } else if constexpr (std::is_same_v<T, FloatTupleSpec>) {
          RealVector v = std::get<RealVector>(current);
          if (direction != 0 && offset) {
            v.at(*offset) += direction * draw_step(rng, d.step);
          } else {
            for (auto& x : v) {
              const auto s = sign();
              x += s * draw_step(rng, d.step);
            }
          }
          return v;
        } else if constexpr (std::is_same_v<T, PerturbationSpec>) {
          RealVector v = std::get<RealVector>(current);
          const auto idx = offset ? *offset
                                  : static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(v.size()) - 1));
          const auto s = sign();
          v.at(idx) += s * uniform_real_closed(rng, 0.0, d.half_width);
          return v;
        } else {
          CommandList list = std::get<CommandList>(current);
          const auto n = static_cast<std::int64_t>(list.size());
          bool change_command = false;
          std::size_t pair = 0;
          if (direction != 0 && offset) {
            change_command = *offset < d.length;
            pair = change_command ? *offset : *offset - d.length;
          } else {
            pair = static_cast<std::size_t>(uniform_int(rng, 0, n - 1));
            change_command = direction == 0 && coin(rng);
          }
          auto& cv = list.at(pair);
          const bool swappable =
              std::find(d.swappable.begin(), d.swappable.end(), cv.command) != d.swappable.end();
          if (change_command && swappable) {
            std::vector<const CommandSpec*> options;
            for (const auto& name : d.swappable)
              if (name != cv.command) options.push_back(d.find(name));
            if (direction != 0) {
              const int here = d.find(cv.command)->id;
              std::erase_if(options, [&](const CommandSpec* c) { return direction > 0 ? c->id < here : c->id > here; });
            }
            if (options.empty()) return std::nullopt;
            cv.command = options[static_cast<std::size_t>(
                                     uniform_int(rng, 0, static_cast<std::int64_t>(options.size()) - 1))]
                             ->name;
            return list;
          }
          if (change_command && direction != 0) return std::nullopt;
          // Value change (also taken when the drawn command cannot be swapped).
          const auto* c = d.find(cv.command);
          const auto s = sign();
          const double step = c->integral ? static_cast<double>(uniform_int(
                                                rng, static_cast<std::int64_t>(std::ceil(c->step.low)),
                                                static_cast<std::int64_t>(std::floor(c->step.high))))
                                          : draw_step(rng, c->step);
          cv.value += s * step;
          return list;
        }
      },
      spec.detail);
}

void require_same_schema(const EnvConfiguration& a, const EnvConfiguration& b) {
  if (a.schema_ptr() != b.schema_ptr() &&
      (a.schema().name() != b.schema().name() || a.schema().encoded_width() != b.schema().encoded_width() ||
       a.schema().size() != b.schema().size()))
    throw SchemaMismatch("crossover between configurations of different schemas");
}

}  // namespace

EnvConfiguration generate_random(const SchemaPtr& schema, Rng& rng) {
  const int attempts = schema->options().generation_attempts;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    std::vector<ParameterValue> values;
    values.reserve(schema->size());
    for (const auto& p : schema->parameters()) values.push_back(generate_value(p, rng));
    EnvConfiguration c(schema, std::move(values), Provenance::Random);
    if (is_valid(c)) return c;
  }
  throw GenerationFailed(attempts);
}

EnvConfiguration mutate_random(const EnvConfiguration& config, Rng& rng) {
  const auto& schema = config.schema();
  for (int attempt = 0; attempt < schema.options().mutation_retries; ++attempt) {
    const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(schema.size()) - 1));
    auto v = propose(schema.parameter(idx), config.value(idx), 0, std::nullopt, rng);
    if (!v) continue;
    auto candidate = config.with_value(idx, std::move(*v), Provenance::Mutated);
    if (is_valid(candidate)) return candidate;
  }
  return config;
}

EnvConfiguration mutate_directed(const EnvConfiguration& config, const DirectedMove& move, Rng& rng) {
  const auto& schema = config.schema();
  if (move.param_index >= schema.size())
    throw SchemaMismatch("directed mutation targets parameter " + std::to_string(move.param_index) + " of " +
                         std::to_string(schema.size()));
  if (move.feature_offset && *move.feature_offset >= schema.layout()[move.param_index].width)
    throw SchemaMismatch("feature offset outside the parameter's encoded span");
  const int direction = move.direction >= 0 ? +1 : -1;
  for (int attempt = 0; attempt < schema.options().mutation_retries; ++attempt) {
    auto v = propose(schema.parameter(move.param_index), config.value(move.param_index), direction,
                     move.feature_offset, rng);
    if (!v) continue;
    auto candidate = config.with_value(move.param_index, std::move(*v), Provenance::Mutated);
    if (is_valid(candidate)) return candidate;
  }
  return config;
}

std::pair<EnvConfiguration, EnvConfiguration> splice_at(const EnvConfiguration& a, const EnvConfiguration& b,
                                                        std::size_t cut) {
  require_same_schema(a, b);
  const auto& schema = a.schema();
  auto va = a.values();
  auto vb = b.values();
  std::size_t unit = 0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto units = schema.parameter(i).crossover_units();
    if (schema.parameter(i).kind() == ParamKind::CommandValueList) {
      auto& la = std::get<CommandList>(va[i]);
      auto& lb = std::get<CommandList>(vb[i]);
      for (std::size_t k = 0; k < units; ++k)
        if (unit + k >= cut) std::swap(la[k], lb[k]);
    } else if (unit >= cut) {
      std::swap(va[i], vb[i]);
    }
    unit += units;
  }
  return {EnvConfiguration(a.schema_ptr(), std::move(va), Provenance::Crossover),
          EnvConfiguration(a.schema_ptr(), std::move(vb), Provenance::Crossover)};
}

std::pair<EnvConfiguration, EnvConfiguration> crossover_single_point(const EnvConfiguration& a,
                                                                     const EnvConfiguration& b, Rng& rng) {
  require_same_schema(a, b);
  const auto positions = static_cast<std::int64_t>(a.schema().crossover_positions());
  if (positions < 2) return {a, b};
  for (int attempt = 0; attempt < a.schema().options().crossover_retries; ++attempt) {
    const auto cut = static_cast<std::size_t>(uniform_int(rng, 1, positions - 1));
    auto children = splice_at(a, b, cut);
    if (is_valid(children.first) && is_valid(children.second)) return children;
  }
  return {a, b};
}

}  // namespace failsearch::config
