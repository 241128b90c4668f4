#include "failsearch/config/json_io.hpp"

#include "failsearch/error.hpp"

#include <cmath>
#include <fstream>

namespace failsearch::config {

using nlohmann::json;

namespace {

IntRange int_range(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw SchemaError(what + ": expected [low, high] integer pair");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

RealRange real_range(const json& j, bool open, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SchemaError(what + ": expected [low, high] numeric pair");
  return {j[0].get<double>(), j[1].get<double>(), open};
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::size_t param_ref(const std::vector<ParameterSpec>& params, const json& c, const char* key) {
  const auto name = c.at(key).get<std::string>();
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return i;
  throw SchemaError("constraint '" + c.value("name", std::string{"?"}) + "' references unknown parameter '" +
                    name + "'");
}

ParameterSpec parse_parameter(const json& p) {
  ParameterSpec spec;
  spec.name = p.at("name").get<std::string>();
  const auto kind = p.at("kind").get<std::string>();
  const auto where = "parameter '" + spec.name + "'";
  if (kind == "discrete-int") {
    DiscreteIntSpec d;
    d.range = int_range(p.at("range"), where);
    if (p.contains("step")) d.step = int_range(p.at("step"), where);
    spec.detail = d;
  } else if (kind == "continuous-float") {
    ContinuousSpec d;
    d.range = real_range(p.at("range"), value_or(p, "range_open", false), where);
    if (p.contains("step")) d.step = real_range(p.at("step"), value_or(p, "step_open", false), where);
    spec.detail = d;
  } else if (kind == "index-set") {
    IndexSetSpec d;
    d.universe = p.at("universe").get<int>();
    if (value_or(p, "index_base", 1) != 1) throw SchemaError(where + ": only 1-indexed sets are supported");
    d.size = p.contains("size") ? int_range(p.at("size"), where) : IntRange{0, d.universe};
    d.generate_size = p.contains("generate_size") ? int_range(p.at("generate_size"), where) : d.size;
    if (p.contains("pick_count")) d.pick_count = int_range(p.at("pick_count"), where);
    if (p.contains("shift_step")) d.shift_step = int_range(p.at("shift_step"), where);
    spec.detail = d;
  } else if (kind == "float-tuple") {
    FloatTupleSpec d;
    for (const auto& c : p.at("coords")) d.coords.push_back(real_range(c, false, where));
    if (p.contains("step")) d.step = real_range(p.at("step"), value_or(p, "step_open", false), where);
    spec.detail = d;
  } else if (kind == "bounded-perturbation-vector") {
    PerturbationSpec d;
    d.base = p.at("base").get<RealVector>();
    d.half_width = p.at("half_width").get<double>();
    spec.detail = d;
  } else if (kind == "command-value-list") {
    CommandListSpec d;
    d.length = p.at("length").get<std::size_t>();
    for (const auto& c : p.at("commands")) {
      CommandSpec cs;
      cs.name = c.at("name").get<std::string>();
      cs.id = c.at("id").get<int>();
      cs.min_value = value_or(c, "min", 0.0);
      cs.generate = real_range(c.at("generate"), false, where);
      cs.integral = value_or(c, "integral", true);
      if (c.contains("step")) cs.step = real_range(c.at("step"), false, where);
      d.commands.push_back(cs);
    }
    d.swappable = value_or(p, "swappable", std::vector<std::string>{});
    d.straight = value_or(p, "straight", std::string{});
    d.curve_marker = value_or(p, "curve_marker", std::string{});
    d.turns = value_or(p, "turns", std::vector<std::string>{});
    spec.detail = d;
  } else {
    throw SchemaError(where + ": unknown kind '" + kind + "'");
  }
  return spec;
}

ConstraintSpec parse_constraint(const std::vector<ParameterSpec>& params, const json& c) {
  ConstraintSpec spec;
  spec.name = c.at("name").get<std::string>();
  const auto rule = c.at("rule").get<std::string>();
  if (rule == "not-member") {
    spec.rule = NotMemberRule{param_ref(params, c, "scalar"), param_ref(params, c, "set")};
  } else if (rule == "range") {
    spec.rule = ExtraRangeRule{param_ref(params, c, "param"),
                               real_range(c.at("range"), value_or(c, "range_open", false), spec.name)};
  } else if (rule == "set-subset-of-universe") {
    spec.rule = SubsetOfUniverseRule{param_ref(params, c, "param")};
  } else if (rule == "bounded-delta-from-base") {
    spec.rule = BoundedDeltaRule{param_ref(params, c, "param")};
  } else if (rule == "starts-ends-with") {
    spec.rule = StartsEndsWithRule{param_ref(params, c, "param"), c.at("command").get<std::string>()};
  } else if (rule == "followed-by") {
    spec.rule = FollowedByRule{param_ref(params, c, "param"), c.at("command").get<std::string>(),
                               c.at("allowed").get<std::vector<std::string>>()};
  } else if (rule == "min-curves") {
    spec.rule = MinCurvesRule{param_ref(params, c, "param"), c.at("count").get<int>(),
                              value_or(c, "strong_angle", 0.0)};
  } else if (rule == "max-rotation-angle") {
    spec.rule = MaxRotationRule{param_ref(params, c, "param"), c.at("degrees").get<double>()};
  } else if (rule == "predicate") {
    spec.rule = PredicateRule{param_ref(params, c, "param"), c.at("predicate").get<std::string>(), {}};
  } else {
    throw SchemaError("constraint '" + spec.name + "': unknown rule '" + rule + "'");
  }
  return spec;
}

}  // namespace

SchemaPtr schema_from_json(const json& doc) {
  try {
    std::vector<ParameterSpec> params;
    for (const auto& p : doc.at("parameters")) params.push_back(parse_parameter(p));
    std::vector<ConstraintSpec> constraints;
    if (doc.contains("constraints"))
      for (const auto& c : doc.at("constraints")) constraints.push_back(parse_constraint(params, c));
    SchemaOptions opts;
    if (doc.contains("options")) {
      const auto& o = doc.at("options");
      opts.crossover_retries = value_or(o, "crossover_retries", opts.crossover_retries);
      opts.mutation_retries = value_or(o, "mutation_retries", opts.mutation_retries);
      opts.generation_attempts = value_or(o, "generation_attempts", opts.generation_attempts);
    }
    return std::make_shared<const ConfigSchema>(doc.at("name").get<std::string>(), std::move(params),
                                                std::move(constraints), opts);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

SchemaPtr load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("schema file " + path.string() + ": " + e.what());
  }
  return schema_from_json(doc);
}

json to_json(const EnvConfiguration& config) {
  json out = json::object();
  const auto& schema = config.schema();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& name = schema.parameter(i).name;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, IndexSet>) {
            out[name] = std::vector<int>(v.begin(), v.end());
          } else if constexpr (std::is_same_v<T, CommandList>) {
            json arr = json::array();
            for (const auto& cv : v) arr.push_back(json::array({cv.command, cv.value}));
            out[name] = std::move(arr);
          } else {
            out[name] = v;
          }
        },
        config.value(i));
  }
  return out;
}

EnvConfiguration config_from_json(const SchemaPtr& schema, const json& doc, Provenance provenance) {
  if (!doc.is_object()) throw SchemaMismatch("configuration must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!schema->index_of(key)) throw SchemaMismatch("unknown parameter '" + key + "'");
  std::vector<ParameterValue> values;
  for (const auto& p : schema->parameters()) {
    if (!doc.contains(p.name)) throw SchemaMismatch("missing parameter '" + p.name + "'");
    const auto& j = doc.at(p.name);
    auto bad = [&] { return SchemaMismatch("parameter '" + p.name + "' has the wrong JSON type"); };
    switch (p.kind()) {
      case ParamKind::DiscreteInt:
        if (j.is_number_integer()) {
          values.emplace_back(j.get<std::int64_t>());
        } else if (j.is_number_float() && std::floor(j.get<double>()) == j.get<double>()) {
          values.emplace_back(static_cast<std::int64_t>(j.get<double>()));
        } else {
          throw bad();
        }
        break;
      case ParamKind::ContinuousFloat:
        if (!j.is_number()) throw bad();
        values.emplace_back(j.get<double>());
        break;
      case ParamKind::IndexSetKind: {
        if (!j.is_array()) throw bad();
        IndexSet s;
        for (const auto& m : j) {
          if (!m.is_number_integer()) throw bad();
          if (!s.insert(m.get<int>()).second)
            throw SchemaMismatch("parameter '" + p.name + "' lists a member twice");
        }
        values.emplace_back(std::move(s));
        break;
      }
      case ParamKind::FloatTuple:
      case ParamKind::PerturbationVector: {
        if (!j.is_array()) throw bad();
        RealVector v;
        for (const auto& x : j) {
          if (!x.is_number()) throw bad();
          v.push_back(x.get<double>());
        }
        values.emplace_back(std::move(v));
        break;
      }
      case ParamKind::CommandValueList: {
        if (!j.is_array()) throw bad();
        CommandList list;
        for (const auto& pair : j) {
          if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_number()) throw bad();
          list.push_back({pair[0].get<std::string>(), pair[1].get<double>()});
        }
        values.emplace_back(std::move(list));
        break;
      }
    }
  }
  return EnvConfiguration(schema, std::move(values), provenance);
}

}  // namespace failsearch::config
