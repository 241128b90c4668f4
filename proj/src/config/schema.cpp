#include "failsearch/config/schema.hpp"

#include "failsearch/config/track.hpp"
#include "failsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace failsearch::config {

const char* to_string(ParamKind kind) noexcept {
  switch (kind) {
    case ParamKind::DiscreteInt: return "discrete-int";
    case ParamKind::ContinuousFloat: return "continuous-float";
    case ParamKind::IndexSetKind: return "index-set";
    case ParamKind::FloatTuple: return "float-tuple";
    case ParamKind::PerturbationVector: return "bounded-perturbation-vector";
    case ParamKind::CommandValueList: return "command-value-list";
  }
  return "?";
}

const CommandSpec* CommandListSpec::find(const std::string& name) const {
  for (const auto& c : commands)
    if (c.name == name) return &c;
  return nullptr;
}

const CommandSpec* CommandListSpec::find_id(int id) const {
  for (const auto& c : commands)
    if (c.id == id) return &c;
  return nullptr;
}

std::size_t ParameterSpec::encoded_width() const {
  struct Visitor {
    std::size_t operator()(const DiscreteIntSpec&) const { return 1; }
    std::size_t operator()(const ContinuousSpec&) const { return 1; }
    std::size_t operator()(const IndexSetSpec& s) const { return static_cast<std::size_t>(s.universe); }
    std::size_t operator()(const FloatTupleSpec& s) const { return s.coords.size(); }
    std::size_t operator()(const PerturbationSpec& s) const { return s.base.size(); }
    std::size_t operator()(const CommandListSpec& s) const { return 2 * s.length; }
  };
  return std::visit(Visitor{}, detail);
}

std::size_t ParameterSpec::crossover_units() const {
  if (const auto* list = std::get_if<CommandListSpec>(&detail)) return list->length;
  return 1;
}

PredicateRegistry& PredicateRegistry::global() {
  static PredicateRegistry registry = [] {
    PredicateRegistry r;
    r.add("track-no-self-intersection", &track::no_self_intersection);
    return r;
  }();
  return registry;
}

void PredicateRegistry::add(const std::string& name, TrackPredicate fn) { table_[name] = std::move(fn); }

std::optional<TrackPredicate> PredicateRegistry::find(const std::string& name) const {
  auto it = table_.find(name);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

namespace {

void check_range(const std::string& param, const RealRange& r) {
  if (!std::isfinite(r.low) || !std::isfinite(r.high) || r.low > r.high ||
      (r.high_open && r.low == r.high))
    throw SchemaError("parameter '" + param + "': empty or non-finite range");
}

void check_range(const std::string& param, const IntRange& r) {
  if (r.low > r.high) throw SchemaError("parameter '" + param + "': empty range");
}

void check_parameter(const ParameterSpec& p) {
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, DiscreteIntSpec>) {
          check_range(p.name, d.range);
          check_range(p.name, d.step);
          if (d.step.low < 0) throw SchemaError("parameter '" + p.name + "': negative step");
        } else if constexpr (std::is_same_v<T, ContinuousSpec>) {
          check_range(p.name, d.range);
          check_range(p.name, d.step);
        } else if constexpr (std::is_same_v<T, IndexSetSpec>) {
          if (d.universe < 1) throw SchemaError("parameter '" + p.name + "': universe size must be >= 1");
          check_range(p.name, d.size);
          check_range(p.name, d.generate_size);
          check_range(p.name, d.pick_count);
          check_range(p.name, d.shift_step);
          if (d.size.low < 0 || d.size.high > d.universe || d.generate_size.low < d.size.low ||
              d.generate_size.high > d.size.high)
            throw SchemaError("parameter '" + p.name + "': member-count bounds outside universe");
          if (d.pick_count.low < 1) throw SchemaError("parameter '" + p.name + "': pick count must be >= 1");
        } else if constexpr (std::is_same_v<T, FloatTupleSpec>) {
          if (d.coords.empty()) throw SchemaError("parameter '" + p.name + "': empty tuple");
          for (const auto& c : d.coords) check_range(p.name, c);
          check_range(p.name, d.step);
        } else if constexpr (std::is_same_v<T, PerturbationSpec>) {
          if (d.base.empty()) throw SchemaError("parameter '" + p.name + "': empty base vector");
          if (!(d.half_width >= 0.0) || !std::isfinite(d.half_width))
            throw SchemaError("parameter '" + p.name + "': half-width must be finite and >= 0");
        } else if constexpr (std::is_same_v<T, CommandListSpec>) {
          if (d.length < 2) throw SchemaError("parameter '" + p.name + "': list length must be >= 2");
          if (d.commands.empty()) throw SchemaError("parameter '" + p.name + "': empty command alphabet");
          std::unordered_set<std::string> names;
          std::unordered_set<int> ids;
          for (const auto& c : d.commands) {
            if (!names.insert(c.name).second || !ids.insert(c.id).second)
              throw SchemaError("parameter '" + p.name + "': duplicate command '" + c.name + "'");
            check_range(p.name, c.generate);
            check_range(p.name, c.step);
          }
          auto known = [&](const std::string& n) { return n.empty() || d.find(n) != nullptr; };
          if (!known(d.straight) || !known(d.curve_marker))
            throw SchemaError("parameter '" + p.name + "': unknown generator command");
          for (const auto& n : d.swappable)
            if (!known(n)) throw SchemaError("parameter '" + p.name + "': unknown swappable command");
          for (const auto& n : d.turns)
            if (!known(n)) throw SchemaError("parameter '" + p.name + "': unknown turn command");
        }
      },
      p.detail);
}

std::size_t rule_param(const ConstraintRule& rule) {
  return std::visit(
      [](const auto& r) -> std::size_t {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, NotMemberRule>)
          return std::max(r.scalar_param, r.set_param);
        else
          return r.param;
      },
      rule);
}

}  // namespace

ConfigSchema::ConfigSchema(std::string name, std::vector<ParameterSpec> parameters,
                           std::vector<ConstraintSpec> constraints, SchemaOptions options)
    : name_(std::move(name)),
      parameters_(std::move(parameters)),
      constraints_(std::move(constraints)),
      options_(options) {
  if (parameters_.empty()) throw SchemaError("schema '" + name_ + "' declares no parameters");
  std::unordered_set<std::string> seen;
  for (const auto& p : parameters_) {
    if (!seen.insert(p.name).second) throw SchemaError("duplicate parameter name '" + p.name + "'");
    check_parameter(p);
    spans_.push_back({width_, p.encoded_width()});
    width_ += p.encoded_width();
    units_ += p.crossover_units();
  }
  for (auto& c : constraints_) {
    if (rule_param(c.rule) >= parameters_.size())
      throw SchemaError("constraint '" + c.name + "' references an undeclared parameter");
    if (auto* pred = std::get_if<PredicateRule>(&c.rule); pred && !pred->fn) {
      auto fn = PredicateRegistry::global().find(pred->predicate);
      if (!fn) throw SchemaError("constraint '" + c.name + "': unknown predicate '" + pred->predicate + "'");
      pred->fn = *fn;
    }
  }
  if (options_.crossover_retries < 1 || options_.mutation_retries < 1 || options_.generation_attempts < 1)
    throw SchemaError("schema retry counts must be >= 1");
}

std::optional<std::size_t> ConfigSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < parameters_.size(); ++i)
    if (parameters_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ConfigSchema::owner_of_feature(std::size_t feature) const {
  for (std::size_t i = 0; i < spans_.size(); ++i)
    if (feature >= spans_[i].start && feature < spans_[i].start + spans_[i].width) return i;
  throw SchemaMismatch("feature index " + std::to_string(feature) + " outside encoded width " +
                       std::to_string(width_));
}

}  // namespace failsearch::config
