#include "failsearch/config/configuration.hpp"

#include "failsearch/config/track.hpp"
#include "failsearch/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace failsearch::config {

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::Random: return "random";
    case Provenance::TrainingFailure: return "training-failure";
    case Provenance::Mutated: return "mutated";
    case Provenance::Crossover: return "crossover";
  }
  return "?";
}

namespace {

// Variant alternative each parameter kind stores its value in.
std::size_t expected_alternative(ParamKind kind) {
  switch (kind) {
    case ParamKind::DiscreteInt: return 0;
    case ParamKind::ContinuousFloat: return 1;
    case ParamKind::IndexSetKind: return 2;
    case ParamKind::FloatTuple:
    case ParamKind::PerturbationVector: return 3;
    case ParamKind::CommandValueList: return 4;
  }
  return 0;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace

void check_shape(const ConfigSchema& schema, std::span<const ParameterValue> values) {
  if (values.size() != schema.size())
    throw SchemaMismatch("configuration has " + std::to_string(values.size()) + " values, schema '" +
                         schema.name() + "' declares " + std::to_string(schema.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& spec = schema.parameter(i);
    if (values[i].index() != expected_alternative(spec.kind()))
      throw SchemaMismatch("parameter '" + spec.name + "' expects a " + to_string(spec.kind()) + " value");
    if (const auto* t = std::get_if<FloatTupleSpec>(&spec.detail)) {
      if (std::get<RealVector>(values[i]).size() != t->coords.size())
        throw SchemaMismatch("parameter '" + spec.name + "': tuple arity mismatch");
    } else if (const auto* p = std::get_if<PerturbationSpec>(&spec.detail)) {
      if (std::get<RealVector>(values[i]).size() != p->base.size())
        throw SchemaMismatch("parameter '" + spec.name + "': vector length mismatch");
    } else if (const auto* l = std::get_if<CommandListSpec>(&spec.detail)) {
      const auto& list = std::get<CommandList>(values[i]);
      if (list.size() != l->length)
        throw SchemaMismatch("parameter '" + spec.name + "': expected " + std::to_string(l->length) +
                             " command-value pairs");
      for (const auto& cv : list)
        if (!l->find(cv.command))
          throw SchemaMismatch("parameter '" + spec.name + "': unknown command '" + cv.command + "'");
    }
  }
}

EnvConfiguration::EnvConfiguration(SchemaPtr schema, std::vector<ParameterValue> values, Provenance provenance)
    : schema_(std::move(schema)), values_(std::move(values)), provenance_(provenance) {
  if (!schema_) throw SchemaMismatch("configuration without schema");
  check_shape(*schema_, values_);
}

EnvConfiguration EnvConfiguration::with_value(std::size_t i, ParameterValue v, Provenance p) const {
  auto values = values_;
  values.at(i) = std::move(v);
  return EnvConfiguration(schema_, std::move(values), p);
}

EnvConfiguration EnvConfiguration::with_provenance(Provenance p) const {
  EnvConfiguration c = *this;
  c.provenance_ = p;
  return c;
}

std::string EnvConfiguration::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i) os << ", ";
    const auto kind = schema_->parameter(i).kind();
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::int64_t>) {
            os << v;
          } else if constexpr (std::is_same_v<T, double>) {
            os << fmt_double(v);
          } else if constexpr (std::is_same_v<T, IndexSet>) {
            os << '{';
            bool first = true;
            for (int m : v) {
              os << (first ? "" : ", ") << m;
              first = false;
            }
            os << '}';
          } else if constexpr (std::is_same_v<T, RealVector>) {
            const bool tuple = kind == ParamKind::FloatTuple;
            os << (tuple ? '(' : '[');
            for (std::size_t k = 0; k < v.size(); ++k) os << (k ? ", " : "") << fmt_double(v[k]);
            os << (tuple ? ')' : ']');
          } else {
            os << '[';
            for (std::size_t k = 0; k < v.size(); ++k)
              os << (k ? ", " : "") << '(' << v[k].command << ", " << fmt_double(v[k].value) << ')';
            os << ']';
          }
        },
        values_[i]);
  }
  os << ']';
  return os.str();
}

namespace {

bool parameter_in_range(const ParameterSpec& spec, const ParameterValue& value) {
  return std::visit(
      [&](const auto& d) -> bool {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, DiscreteIntSpec>) {
          return d.range.contains(std::get<std::int64_t>(value));
        } else if constexpr (std::is_same_v<T, ContinuousSpec>) {
          const double v = std::get<double>(value);
          return std::isfinite(v) && d.range.contains(v);
        } else if constexpr (std::is_same_v<T, IndexSetSpec>) {
          const auto& s = std::get<IndexSet>(value);
          const auto n = static_cast<std::int64_t>(s.size());
          if (!d.size.contains(n)) return false;
          return s.empty() || (*s.begin() >= 1 && *s.rbegin() <= d.universe);
        } else if constexpr (std::is_same_v<T, FloatTupleSpec>) {
          const auto& v = std::get<RealVector>(value);
          for (std::size_t k = 0; k < v.size(); ++k)
            if (!std::isfinite(v[k]) || !d.coords[k].contains(v[k])) return false;
          return true;
        } else if constexpr (std::is_same_v<T, PerturbationSpec>) {
          const auto& v = std::get<RealVector>(value);
          for (std::size_t k = 0; k < v.size(); ++k)
            if (!std::isfinite(v[k]) || std::abs(v[k] - d.base[k]) > d.half_width) return false;
          return true;
        } else {
          for (const auto& cv : std::get<CommandList>(value)) {
            const auto* c = d.find(cv.command);
            if (!std::isfinite(cv.value) || cv.value < c->min_value) return false;
            if (c->integral && !is_integral(cv.value)) return false;
          }
          return true;
        }
      },
      spec.detail);
}

double scalar_of(const ParameterValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nan("");
}

bool constraint_holds(const ConfigSchema& schema, const ConstraintSpec& c,
                      const std::vector<ParameterValue>& values) {
  return std::visit(
      [&](const auto& r) -> bool {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, NotMemberRule>) {
          const double s = scalar_of(values[r.scalar_param]);
          const auto* set = std::get_if<IndexSet>(&values[r.set_param]);
          if (!set || !is_integral(s)) return true;
          return !set->contains(static_cast<int>(s));
        } else if constexpr (std::is_same_v<T, ExtraRangeRule>) {
          const double s = scalar_of(values[r.param]);
          return std::isfinite(s) && r.range.contains(s);
        } else if constexpr (std::is_same_v<T, SubsetOfUniverseRule>) {
          const auto* set = std::get_if<IndexSet>(&values[r.param]);
          const auto* spec = std::get_if<IndexSetSpec>(&schema.parameter(r.param).detail);
          if (!set || !spec) return true;
          return set->empty() || (*set->begin() >= 1 && *set->rbegin() <= spec->universe);
        } else if constexpr (std::is_same_v<T, BoundedDeltaRule>) {
          return parameter_in_range(schema.parameter(r.param), values[r.param]);
        } else {
          const auto* list = std::get_if<CommandList>(&values[r.param]);
          const auto* spec = std::get_if<CommandListSpec>(&schema.parameter(r.param).detail);
          if (!list || !spec) return true;
          if constexpr (std::is_same_v<T, StartsEndsWithRule>) {
            return !list->empty() && list->front().command == r.command && list->back().command == r.command;
          } else if constexpr (std::is_same_v<T, FollowedByRule>) {
            for (std::size_t i = 0; i < list->size(); ++i) {
              if ((*list)[i].command != r.command) continue;
              if (i + 1 >= list->size()) return false;
              const auto& next = (*list)[i + 1].command;
              if (std::find(r.allowed.begin(), r.allowed.end(), next) == r.allowed.end()) return false;
            }
            return true;
          } else if constexpr (std::is_same_v<T, MinCurvesRule>) {
            const auto cs = track::curves(*list, *spec);
            if (static_cast<int>(cs.size()) < r.count) return false;
            if (r.strong_angle <= 0.0) return true;
            return std::any_of(cs.begin(), cs.end(),
                               [&](const track::Curve& cv) { return cv.rotation_degrees >= r.strong_angle; });
          } else if constexpr (std::is_same_v<T, MaxRotationRule>) {
            const auto cs = track::curves(*list, *spec);
            return std::all_of(cs.begin(), cs.end(),
                               [&](const track::Curve& cv) { return cv.rotation_degrees <= r.degrees; });
          } else {
            return r.fn(*list, *spec);
          }
        }
      },
      c.rule);
}

}  // namespace

ValidationResult validate(const EnvConfiguration& config, const ConfigSchema& schema) {
  check_shape(schema, config.values());
  ValidationResult result;
  const auto& values = config.values();
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (!parameter_in_range(schema.parameter(i), values[i]))
      result.violations.push_back(schema.parameter(i).name + "-range");
  for (const auto& c : schema.constraints())
    if (!constraint_holds(schema, c, values)) result.violations.push_back(c.name);
  return result;
}

bool is_valid(const EnvConfiguration& config) { return validate(config).ok(); }

FeatureVector encode(const EnvConfiguration& config) {
  const auto& schema = config.schema();
  FeatureVector out(schema.encoded_width(), 0.0);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto span = schema.layout()[i];
    const auto& spec = schema.parameter(i);
    const auto& value = config.value(i);
    switch (spec.kind()) {
      case ParamKind::DiscreteInt:
        out[span.start] = static_cast<double>(std::get<std::int64_t>(value));
        break;
      case ParamKind::ContinuousFloat:
        out[span.start] = std::get<double>(value);
        break;
      case ParamKind::IndexSetKind:
        for (int m : std::get<IndexSet>(value))
          if (m >= 1 && static_cast<std::size_t>(m) <= span.width) out[span.start + m - 1] = 1.0;
        break;
      case ParamKind::FloatTuple:
      case ParamKind::PerturbationVector: {
        const auto& v = std::get<RealVector>(value);
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(span.start));
        break;
      }
      case ParamKind::CommandValueList: {
        const auto& list = std::get<CommandList>(value);
        const auto& ls = std::get<CommandListSpec>(spec.detail);
        for (std::size_t k = 0; k < list.size(); ++k) {
          out[span.start + k] = static_cast<double>(ls.find(list[k].command)->id);
          out[span.start + ls.length + k] = list[k].value;
        }
        break;
      }
    }
  }
  return out;
}

EnvConfiguration decode(const SchemaPtr& schema, std::span<const double> features, Provenance provenance) {
  if (features.size() != schema->encoded_width())
    throw SchemaMismatch("feature vector width " + std::to_string(features.size()) + " != " +
                         std::to_string(schema->encoded_width()));
  std::vector<ParameterValue> values;
  values.reserve(schema->size());
  for (std::size_t i = 0; i < schema->size(); ++i) {
    const auto span = schema->layout()[i];
    const auto& spec = schema->parameter(i);
    auto slice = features.subspan(span.start, span.width);
    switch (spec.kind()) {
      case ParamKind::DiscreteInt:
        values.emplace_back(static_cast<std::int64_t>(std::llround(slice[0])));
        break;
      case ParamKind::ContinuousFloat:
        values.emplace_back(slice[0]);
        break;
      case ParamKind::IndexSetKind: {
        IndexSet s;
        for (std::size_t k = 0; k < slice.size(); ++k)
          if (slice[k] > 0.5) s.insert(static_cast<int>(k) + 1);
        values.emplace_back(std::move(s));
        break;
      }
      case ParamKind::FloatTuple:
      case ParamKind::PerturbationVector:
        values.emplace_back(RealVector(slice.begin(), slice.end()));
        break;
      case ParamKind::CommandValueList: {
        const auto& ls = std::get<CommandListSpec>(spec.detail);
        CommandList list;
        for (std::size_t k = 0; k < ls.length; ++k) {
          const auto* c = ls.find_id(static_cast<int>(std::lround(slice[k])));
          if (!c) throw SchemaMismatch("parameter '" + spec.name + "': unknown command id");
          list.push_back({c->name, slice[ls.length + k]});
        }
        values.emplace_back(std::move(list));
        break;
      }
    }
  }
  return EnvConfiguration(schema, std::move(values), provenance);
}

}  // namespace failsearch::config
