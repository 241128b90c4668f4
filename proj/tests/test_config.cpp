#include <doctest.h>

#include "failsearch/config/json_io.hpp"
#include "failsearch/config/operators.hpp"
#include "failsearch/config/track.hpp"
#include "failsearch/error.hpp"

#include <algorithm>
#include <numeric>

using namespace failsearch;
using namespace failsearch::config;

namespace {

SchemaPtr bundled(const std::string& name) {
  return load_schema(std::string(FAILSEARCH_SCHEMA_DIR) + "/" + name + ".schema.json");
}

EnvConfiguration parking(const SchemaPtr& s, std::int64_t goal, double head, IndexSet pv, double x, double y) {
  return EnvConfiguration(s, {goal, head, std::move(pv), RealVector{x, y}});
}

std::size_t changed_params(const EnvConfiguration& a, const EnvConfiguration& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) n += a.value(i) != b.value(i);
  return n;
}

SchemaPtr one_point_schema() {
  return std::make_shared<const ConfigSchema>(
      "one-point", std::vector<ParameterSpec>{{"only", DiscreteIntSpec{{1, 1}, {1, 20}}}},
      std::vector<ConstraintSpec>{});
}

}  // namespace

TEST_CASE("parking schema layout") {
  auto s = bundled("parking");
  CHECK(s->size() == 4);
  CHECK(s->encoded_width() == 24);
  CHECK(s->crossover_positions() == 4);
  CHECK(s->layout()[2].start == 2);
  CHECK(s->layout()[2].width == 20);
  CHECK(s->owner_of_feature(1) == 1);
  CHECK(s->owner_of_feature(21) == 2);
  CHECK(s->owner_of_feature(23) == 3);
}

TEST_CASE("validate parking examples") {
  auto s = bundled("parking");
  CHECK(validate(parking(s, 20, 0.0, {3, 5, 6, 8, 13}, 0.0, 0.0)).ok());

  auto bad = validate(parking(s, 5, 0.0, {5}, 0.0, 0.0));
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0] == "goal-not-in-pvehicles");

  auto head = validate(parking(s, 20, 1.0, {3}, 0.0, 0.0));
  REQUIRE(head.violations.size() == 1);
  CHECK(head.violations[0] == "head_ego-range");
  CHECK(validate(parking(s, 20, 0.999999, {3}, 0.0, 0.0)).ok());

  // schema order: per-parameter ranges first, then constraints
  auto many = validate(parking(s, 22, -0.1, {21}, 11.0, 0.0));
  CHECK(many.violations ==
        std::vector<std::string>{"goal_lane-range", "head_ego-range", "pvehicles-range", "pos_ego-range"});
  auto two = validate(parking(s, 3, 1.5, {3}, 0.0, 0.0));
  CHECK(two.violations == std::vector<std::string>{"head_ego-range", "goal-not-in-pvehicles"});
}

TEST_CASE("shape mismatches are errors") {
  auto s = bundled("parking");
  CHECK_THROWS_AS(EnvConfiguration(s, {std::int64_t{20}, 0.0}), SchemaMismatch);
  CHECK_THROWS_AS(EnvConfiguration(s, {0.5, 0.0, IndexSet{}, RealVector{0, 0}}), SchemaMismatch);
  CHECK_THROWS_AS(EnvConfiguration(s, {std::int64_t{1}, 0.0, IndexSet{}, RealVector{0}}), SchemaMismatch);
  auto other = bundled("trackgen");
  auto c = generate_random(other, *std::make_unique<Rng>(1));
  CHECK_THROWS_AS(validate(c, *s), SchemaMismatch);
}

TEST_CASE("encode the worked parking configuration") {
  auto s = bundled("parking");
  auto fv = encode(parking(s, 20, 0.0, {3, 5, 6, 8, 13, 19}, 0.0, 0.0));
  const FeatureVector expected{20, 0.0, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0.0, 0.0};
  CHECK(fv == expected);

  auto empty = encode(parking(s, 7, 0.25, {}, 1.5, -2.0));
  CHECK(std::all_of(empty.begin() + 2, empty.begin() + 22, [](double v) { return v == 0.0; }));
  CHECK(empty[22] == 1.5);
  CHECK(empty[23] == -2.0);
}

TEST_CASE("command-value lists encode ids then values") {
  auto s = bundled("trackgen");
  CHECK(s->encoded_width() == 24);
  CHECK(s->crossover_positions() == 12);
  Rng rng(3);
  auto c = generate_random(s, rng);
  auto fv = encode(c);
  const auto& list = std::get<CommandList>(c.value(0));
  const auto& spec = std::get<CommandListSpec>(s->parameter(0).detail);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(fv[k] == spec.find(list[k].command)->id);
    CHECK(fv[12 + k] == list[k].value);
  }
}

TEST_CASE("random generation is valid and round-trips through the encoding") {
  for (const auto* name : {"parking", "perturbation", "trackgen"}) {
    CAPTURE(name);
    auto s = bundled(name);
    std::size_t failures = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      Rng rng(seed);
      auto c = generate_random(s, rng);
      if (!is_valid(c)) ++failures;
      auto back = decode(s, encode(c));
      if (!(back == c)) ++failures;
      if (!(config_from_json(s, to_json(c)) == c)) ++failures;
    }
    CHECK(failures == 0);
  }
}

TEST_CASE("generation is deterministic given the seed") {
  auto s = bundled("parking");
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) CHECK(generate_random(s, a) == generate_random(s, b));
}

TEST_CASE("one-point space and unsatisfiable constraints") {
  auto s = one_point_schema();
  Rng rng(5);
  auto c = generate_random(s, rng);
  CHECK(std::get<std::int64_t>(c.value(0)) == 1);
  CHECK(mutate_random(c, rng) == c);
  CHECK(mutate_directed(c, {0, +1, std::nullopt}, rng) == c);

  auto impossible = std::make_shared<const ConfigSchema>(
      "impossible",
      std::vector<ParameterSpec>{{"a", DiscreteIntSpec{{1, 10}, {1, 1}}}},
      std::vector<ConstraintSpec>{{"never", ExtraRangeRule{0, RealRange{20.0, 30.0}}}});
  try {
    generate_random(impossible, rng);
    FAIL("expected GenerationFailed");
  } catch (const GenerationFailed& e) {
    CHECK(e.attempts() == 1000);
  }
}

TEST_CASE("random mutation keeps validity and touches one parameter") {
  for (const auto* name : {"parking", "perturbation", "trackgen"}) {
    CAPTURE(name);
    auto s = bundled(name);
    Rng rng(11);
    std::size_t invalid = 0, multi = 0, identity = 0;
    for (int i = 0; i < 3000; ++i) {
      auto c = generate_random(s, rng);
      auto m = mutate_random(c, rng);
      invalid += !is_valid(m);
      const auto n = changed_params(c, m);
      multi += n > 1;
      identity += n == 0;
    }
    CHECK(invalid == 0);
    CHECK(multi == 0);
    CHECK(identity < 3000);
  }
}

TEST_CASE("mutation never puts a parked car on the goal lane") {
  auto s = bundled("parking");
  IndexSet full;
  for (int m = 2; m <= 20; ++m) full.insert(m);
  auto c = parking(s, 1, 0.2, full, 0.0, 0.0);
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    auto m = mutate_random(c, rng);
    CHECK(is_valid(m));
    CHECK_FALSE(std::get<IndexSet>(m.value(2)).contains(static_cast<int>(std::get<std::int64_t>(m.value(0)))));
  }
}

TEST_CASE("heading 0.0 -> 0.5 is a reachable mutation") {
  auto s = bundled("parking");
  auto c = parking(s, 20, 0.0, {3, 5, 6, 8, 13, 19}, 0.0, 0.0);
  CHECK(is_valid(c.with_value(1, 0.5, Provenance::Mutated)));
  Rng rng(21);
  double closest = 1.0;
  for (int i = 0; i < 2000; ++i) {
    auto m = mutate_directed(c, {1, +1, std::nullopt}, rng);
    closest = std::min(closest, std::abs(std::get<double>(m.value(1)) - 0.5));
  }
  CHECK(closest < 0.01);
}

TEST_CASE("directed mutation arithmetic and bounds") {
  auto s = bundled("parking");
  auto c = parking(s, 10, 0.3, {1, 2}, 0.0, 0.0);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Rng replay(seed);
    const double step = uniform_real(replay, 0.0, 1.0);
    auto m = mutate_directed(c, {1, +1, std::nullopt}, rng);
    if (0.3 + step >= 1.0) continue;
    CHECK(std::get<double>(m.value(1)) == 0.3 + step);
    ++checked;
  }
  CHECK(checked > 5);
  Rng rng(4);

  // upper bound: no positive step is valid
  auto top = parking(s, 20, 0.3, {1, 2}, 0.0, 0.0);
  for (int i = 0; i < 200; ++i) CHECK(mutate_directed(top, {0, +1, std::nullopt}, rng) == top);
  // lower bound for a negative move
  auto bottom = parking(s, 1, 0.3, {4}, 0.0, 0.0);
  for (int i = 0; i < 200; ++i) CHECK(mutate_directed(bottom, {0, -1, std::nullopt}, rng) == bottom);
}

TEST_CASE("directed mutation only changes the target parameter in the given direction") {
  auto s = bundled("parking");
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    auto c = generate_random(s, rng);
    const auto p = static_cast<std::size_t>(uniform_int(rng, 0, 3));
    const int dir = coin(rng) ? 1 : -1;
    auto m = mutate_directed(c, {p, dir, std::nullopt}, rng);
    CHECK(is_valid(m));
    for (std::size_t k = 0; k < 4; ++k)
      if (k != p) CHECK(m.value(k) == c.value(k));
    if (p == 0) CHECK((std::get<std::int64_t>(m.value(0)) - std::get<std::int64_t>(c.value(0))) * dir >= 0);
    if (p == 1) CHECK((std::get<double>(m.value(1)) - std::get<double>(c.value(1))) * dir >= 0);
    if (p == 2) {
      const auto before = std::get<IndexSet>(c.value(2)).size();
      const auto after = std::get<IndexSet>(m.value(2)).size();
      CHECK((static_cast<long>(after) - static_cast<long>(before)) * dir >= 0);
    }
  }
}

TEST_CASE("attributed index-set moves add or remove that member") {
  auto s = bundled("parking");
  auto c = parking(s, 20, 0.0, {3, 5}, 0.0, 0.0);
  Rng rng(2);
  auto added = mutate_directed(c, {2, +1, std::size_t{6}}, rng);  // universe index 7
  CHECK(std::get<IndexSet>(added.value(2)) == IndexSet{3, 5, 7});
  auto removed = mutate_directed(c, {2, -1, std::size_t{2}}, rng);  // universe index 3
  CHECK(std::get<IndexSet>(removed.value(2)) == IndexSet{5});
  // adding an existing member or the goal lane has no valid outcome
  CHECK(mutate_directed(c, {2, +1, std::size_t{4}}, rng) == c);
  CHECK(mutate_directed(c, {2, +1, std::size_t{19}}, rng) == c);
}

TEST_CASE("command mutation swaps only between L and R") {
  auto s = bundled("trackgen");
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    auto c = generate_random(s, rng);
    auto m = mutate_random(c, rng);
    const auto& a = std::get<CommandList>(c.value(0));
    const auto& b = std::get<CommandList>(m.value(0));
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].command != b[k].command) {
        CHECK((a[k].command == "L" || a[k].command == "R"));
        CHECK((b[k].command == "L" || b[k].command == "R"));
        CHECK(a[k].value == b[k].value);
      }
    }
  }
}

TEST_CASE("worked crossover example") {
  auto s = bundled("parking");
  auto a = parking(s, 20, 0.0, {3, 5, 6, 8, 13, 19}, 0.0, 0.0);
  auto b = parking(s, 15, 0.5, {1, 3, 9}, -1.0, 7.5);
  auto [c1, c2] = splice_at(a, b, 1);
  CHECK(c1 == parking(s, 20, 0.5, {1, 3, 9}, -1.0, 7.5));
  CHECK(c2 == parking(s, 15, 0.0, {3, 5, 6, 8, 13, 19}, 0.0, 0.0));
  CHECK(c1.to_string() == "[20, 0.5, {1, 3, 9}, (-1.0, 7.5)]");
  // 7.5 lies outside pos_ego.y's [-5, 5], so the checked operator keeps the parents
  CHECK(validate(b).violations == std::vector<std::string>{"pos_ego-range"});
  Rng rng(1);
  auto [p1, p2] = crossover_single_point(a, b, rng);
  CHECK(p1 == a);
  CHECK(p2 == b);
}

TEST_CASE("checked crossover uses the drawn cut") {
  auto s = bundled("parking");
  auto a = parking(s, 20, 0.0, {3, 5, 6, 8, 13, 19}, 0.0, 0.0);
  auto b = parking(s, 15, 0.5, {1, 3, 9}, -1.0, 4.5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    Rng replay(seed);
    const auto cut = static_cast<std::size_t>(uniform_int(replay, 1, 3));
    auto got = crossover_single_point(a, b, rng);
    auto want = splice_at(a, b, cut);
    CHECK(got.first == want.first);
    CHECK(got.second == want.second);
  }
  Rng rng(0);
  auto same = crossover_single_point(a, a, rng);
  CHECK(same.first == a);
  CHECK(same.second == a);
}

TEST_CASE("crossover falls back to the parents when a child is invalid") {
  auto s = std::make_shared<const ConfigSchema>(
      "lane-and-cars",
      std::vector<ParameterSpec>{{"goal", DiscreteIntSpec{{1, 20}, {1, 20}}},
                                 {"cars", IndexSetSpec{20, {0, 19}, {0, 5}, {1, 3}, {1, 20}}}},
      std::vector<ConstraintSpec>{{"goal-free", NotMemberRule{0, 1}}});
  EnvConfiguration a(s, {std::int64_t{5}, IndexSet{1}});
  EnvConfiguration b(s, {std::int64_t{1}, IndexSet{5}});
  Rng rng(9);
  auto [c1, c2] = crossover_single_point(a, b, rng);
  CHECK(c1 == a);
  CHECK(c2 == b);
}

TEST_CASE("crossover prefix/suffix property") {
  for (const auto* name : {"parking", "trackgen", "perturbation"}) {
    CAPTURE(name);
    auto s = bundled(name);
    Rng rng(123);
    for (int i = 0; i < 300; ++i) {
      auto a = generate_random(s, rng);
      auto b = generate_random(s, rng);
      const auto cut = static_cast<std::size_t>(
          uniform_int(rng, 1, static_cast<std::int64_t>(s->crossover_positions()) - 1));
      auto [c1, c2] = splice_at(a, b, cut);
      if (s->parameter(0).kind() == ParamKind::CommandValueList) {
        const auto& la = std::get<CommandList>(a.value(0));
        const auto& lb = std::get<CommandList>(b.value(0));
        const auto& l1 = std::get<CommandList>(c1.value(0));
        const auto& l2 = std::get<CommandList>(c2.value(0));
        for (std::size_t k = 0; k < la.size(); ++k) {
          CHECK(l1[k] == (k < cut ? la[k] : lb[k]));
          CHECK(l2[k] == (k < cut ? lb[k] : la[k]));
        }
      } else {
        for (std::size_t k = 0; k < s->size(); ++k) {
          CHECK(c1.value(k) == (k < cut ? a.value(k) : b.value(k)));
          CHECK(c2.value(k) == (k < cut ? b.value(k) : a.value(k)));
        }
      }
      auto checked = crossover_single_point(a, b, rng);
      CHECK(is_valid(checked.first));
      CHECK(is_valid(checked.second));
    }
  }
}

TEST_CASE("track geometry") {
  auto s = bundled("trackgen");
  const auto& spec = std::get<CommandListSpec>(s->parameter(0).detail);
  CommandList t{{"S", 2}, {"DY", 15.2}, {"L", 3}, {"S", 1}};
  auto cs = track::curves(t, spec);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].rotation_degrees == doctest::Approx(45.6));
  CHECK(track::polyline(t, spec).size() == 7);
  // a full loop intersects itself
  CommandList loop{{"S", 1}, {"DY", 90.0}, {"L", 5}, {"S", 1}};
  CHECK(track::self_intersects(track::polyline(loop, spec)));
  CHECK_FALSE(track::self_intersects(track::polyline(t, spec)));
}

TEST_CASE("track constraints") {
  auto s = bundled("trackgen");
  auto make = [&](CommandList l) { return EnvConfiguration(s, {std::move(l)}); };
  CommandList good{{"S", 3}, {"DY", 30.0}, {"L", 5}, {"S", 2}, {"DY", 20.0}, {"R", 4},
                   {"S", 2}, {"DY", 15.0}, {"L", 4}, {"S", 3}, {"S", 1}, {"S", 2}};
  CHECK(validate(make(good)).ok());
  auto bad_end = good;
  bad_end.back() = {"L", 2};
  CHECK(validate(make(bad_end)).violations == std::vector<std::string>{"starts-ends-with-S"});
  auto bad_follow = good;
  bad_follow[2] = {"S", 5};
  auto v = validate(make(bad_follow)).violations;
  CHECK(std::find(v.begin(), v.end(), "DY-followed-by-turn") != v.end());
  auto sharp = good;
  sharp[1] = {"DY", 40.0};  // 40 * 5 = 200 degrees
  v = validate(make(sharp)).violations;
  CHECK(std::find(v.begin(), v.end(), "max-rotation-angle") != v.end());
  auto soft = good;
  soft[1] = {"DY", 20.0};  // largest curve now 100 degrees
  v = validate(make(soft)).violations;
  CHECK(std::find(v.begin(), v.end(), "min-curves") != v.end());
}

TEST_CASE("schema construction errors") {
  auto dup = [] {
    return ConfigSchema("dup",
                        {{"a", DiscreteIntSpec{{1, 2}, {1, 1}}}, {"a", DiscreteIntSpec{{1, 2}, {1, 1}}}}, {});
  };
  CHECK_THROWS_AS(dup(), SchemaError);
  CHECK_THROWS_AS(ConfigSchema("empty-range", {{"a", DiscreteIntSpec{{3, 2}, {1, 1}}}}, {}), SchemaError);
  CHECK_THROWS_AS(ConfigSchema("neg-m", {{"a", PerturbationSpec{{0.0}, -1.0}}}, {}), SchemaError);
  CHECK_THROWS_AS(ConfigSchema("bad-ref", {{"a", DiscreteIntSpec{{1, 2}, {1, 1}}}},
                               {{"c", BoundedDeltaRule{3}}}),
                  SchemaError);
  nlohmann::json doc = {{"name", "x"},
                        {"parameters", {{{"name", "t"}, {"kind", "wat"}}}}};
  CHECK_THROWS_AS(schema_from_json(doc), SchemaError);
}

TEST_CASE("configuration JSON uses parameter names") {
  auto s = bundled("parking");
  auto c = parking(s, 20, 0.0, {3, 5}, 0.0, -1.5);
  auto j = to_json(c);
  CHECK(j["goal_lane"] == 20);
  CHECK(j["pvehicles"] == nlohmann::json::array({3, 5}));
  CHECK(config_from_json(s, j) == c);
  j["extra"] = 1;
  CHECK_THROWS_AS(config_from_json(s, j), SchemaMismatch);
}
