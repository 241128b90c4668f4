#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace failsearch::config {

struct IntRange {
  std::int64_t low = 0;
  std::int64_t high = 0;
  bool contains(std::int64_t v) const noexcept { return v >= low && v <= high; }
};

struct RealRange {
  double low = 0.0;
  double high = 0.0;
  bool high_open = false;  // [low, high) instead of [low, high]
  bool contains(double v) const noexcept {
    return v >= low && (high_open ? v < high : v <= high);
  }
};

// ---- parameter values ------------------------------------------------------

using IndexSet = std::set<int>;  // 1-indexed universe members
using RealVector = std::vector<double>;

struct CommandValue {
  std::string command;
  double value = 0.0;
  friend bool operator==(const CommandValue&, const CommandValue&) = default;
};
using CommandList = std::vector<CommandValue>;

using ParameterValue = std::variant<std::int64_t, double, IndexSet, RealVector, CommandList>;

// ---- parameter kinds --------------------------------------------------------

enum class ParamKind {
  DiscreteInt,
  ContinuousFloat,
  IndexSetKind,
  FloatTuple,
  PerturbationVector,
  CommandValueList,
};

const char* to_string(ParamKind kind) noexcept;

struct DiscreteIntSpec {
  IntRange range;
  IntRange step{1, 20};
};

struct ContinuousSpec {
  RealRange range;
  RealRange step{0.0, 1.0, true};
};

struct IndexSetSpec {
  int universe = 1;
  IntRange size;           // validity bound on member count
  IntRange generate_size;  // member count drawn when generating at random
  IntRange pick_count{1, 3};
  IntRange shift_step{1, 20};
};

struct FloatTupleSpec {
  std::vector<RealRange> coords;
  RealRange step{0.0, 1.0, false};
};

struct PerturbationSpec {
  RealVector base;
  double half_width = 0.0;
};

struct CommandSpec {
  std::string name;
  int id = 0;
  double min_value = 0.0;  // validity lower bound
  RealRange generate;      // generation range
  bool integral = true;
  RealRange step{1.0, 20.0, false};
};

struct CommandListSpec {
  std::size_t length = 0;
  std::vector<CommandSpec> commands;
  std::vector<std::string> swappable;  // commands the change-command operator may exchange
  std::string straight;                // filler command used by the generator
  std::string curve_marker;            // command that opens a curve
  std::vector<std::string> turns;      // commands that may follow the marker

  const CommandSpec* find(const std::string& name) const;
  const CommandSpec* find_id(int id) const;
};

using ParameterDetail = std::variant<DiscreteIntSpec, ContinuousSpec, IndexSetSpec, FloatTupleSpec,
                                     PerturbationSpec, CommandListSpec>;

struct ParameterSpec {
  std::string name;
  ParameterDetail detail;

  ParamKind kind() const noexcept { return static_cast<ParamKind>(detail.index()); }
  // Width of this parameter in the encoded feature vector.
  std::size_t encoded_width() const;
  // Number of crossover positions this parameter contributes.
  std::size_t crossover_units() const;
};

// ---- cross-parameter constraints -------------------------------------------

class ConfigSchema;

using TrackPredicate = std::function<bool(const CommandList&, const CommandListSpec&)>;

struct NotMemberRule {
  std::size_t scalar_param = 0;
  std::size_t set_param = 0;
};
struct ExtraRangeRule {
  std::size_t param = 0;
  RealRange range;
};
struct SubsetOfUniverseRule {
  std::size_t param = 0;
};
struct BoundedDeltaRule {
  std::size_t param = 0;
};
struct StartsEndsWithRule {
  std::size_t param = 0;
  std::string command;
};
struct FollowedByRule {
  std::size_t param = 0;
  std::string command;
  std::vector<std::string> allowed;
};
struct MinCurvesRule {
  std::size_t param = 0;
  int count = 0;
  double strong_angle = 0.0;  // at least one curve must reach this rotation (0 disables)
};
struct MaxRotationRule {
  std::size_t param = 0;
  double degrees = 0.0;
};
struct PredicateRule {
  std::size_t param = 0;
  std::string predicate;
  TrackPredicate fn;
};

using ConstraintRule = std::variant<NotMemberRule, ExtraRangeRule, SubsetOfUniverseRule, BoundedDeltaRule,
                                    StartsEndsWithRule, FollowedByRule, MinCurvesRule, MaxRotationRule,
                                    PredicateRule>;

struct ConstraintSpec {
  std::string name;
  ConstraintRule rule;
};

// Named predicates that schema files can reference by string.
class PredicateRegistry {
public:
  static PredicateRegistry& global();
  void add(const std::string& name, TrackPredicate fn);
  std::optional<TrackPredicate> find(const std::string& name) const;

private:
  std::map<std::string, TrackPredicate> table_;
};

struct Span {
  std::size_t start = 0;
  std::size_t width = 0;
};

struct SchemaOptions {
  int crossover_retries = 1;
  int mutation_retries = 10;
  int generation_attempts = 1000;
};

// Immutable description of a configuration space. Shared by pointer.
class ConfigSchema {
public:
  ConfigSchema(std::string name, std::vector<ParameterSpec> parameters,
               std::vector<ConstraintSpec> constraints, SchemaOptions options = {});

  const std::string& name() const noexcept { return name_; }
  const std::vector<ParameterSpec>& parameters() const noexcept { return parameters_; }
  const std::vector<ConstraintSpec>& constraints() const noexcept { return constraints_; }
  const SchemaOptions& options() const noexcept { return options_; }

  std::size_t size() const noexcept { return parameters_.size(); }
  const ParameterSpec& parameter(std::size_t i) const { return parameters_.at(i); }
  std::optional<std::size_t> index_of(const std::string& name) const;

  std::size_t encoded_width() const noexcept { return width_; }
  const std::vector<Span>& layout() const noexcept { return spans_; }
  // Parameter owning a feature index.
  std::size_t owner_of_feature(std::size_t feature) const;

  std::size_t crossover_positions() const noexcept { return units_; }

private:
  std::string name_;
  std::vector<ParameterSpec> parameters_;
  std::vector<ConstraintSpec> constraints_;
  SchemaOptions options_;
  std::vector<Span> spans_;
  std::size_t width_ = 0;
  std::size_t units_ = 0;
};

using SchemaPtr = std::shared_ptr<const ConfigSchema>;

}  // namespace failsearch::config
