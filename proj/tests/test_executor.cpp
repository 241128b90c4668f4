#include <doctest.h>

#include "failsearch/config/operators.hpp"
#include "failsearch/error.hpp"
#include "failsearch/executor.hpp"
#include "helpers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

using namespace failsearch;
using namespace failsearch::exec;
using config::EnvConfiguration;
using testing_helpers::bundled;

namespace {

EnvConfiguration parking(std::int64_t goal, double head, config::IndexSet parked, double x = 0.0, double y = 0.0) {
  return EnvConfiguration(bundled("parking"), {goal, head, std::move(parked), config::RealVector{x, y}});
}

SyntheticParams small_synthetic(double theta, double noise) {
  auto p = default_synthetic_params(bundled("parking"), 0.1, noise, 2000);
  p.theta = theta;
  return p;
}

}  // namespace

TEST_CASE("is_failure is strict at one half") {
  auto o = ExecutionOutcome(parking(5, 0.0, {}));
  o.failure_probability = 0.6;
  CHECK(is_failure(o));
  o.failure_probability = 0.5;
  CHECK_FALSE(is_failure(o));
  o.failure_probability = 0.0;
  CHECK_FALSE(is_failure(o));
}

TEST_CASE("synthetic SUT with infinite thresholds") {
  const auto schema = bundled("parking");
  const double inf = std::numeric_limits<double>::infinity();
  SyntheticSut never(schema, small_synthetic(inf, 0.0));
  SyntheticSut always(schema, small_synthetic(-inf, 0.0));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto e = config::generate_random(schema, rng);
    CHECK_FALSE(is_failure(execute(never, e, 1, 7)));
    const auto o = execute(always, e, 1, 7);
    CHECK(o.failure_probability == 1.0);
    for (const auto& s : o.trajectories[0].samples) CHECK(std::isfinite(s[0]));
  }
}

TEST_CASE("synthetic SUT agrees with its predicate when noise is zero") {
  const auto schema = bundled("parking");
  const auto params = default_synthetic_params(schema, 0.1, 0.0, 5000);
  SyntheticSut sut(schema, params);
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto e = config::generate_random(schema, rng);
    const bool direct = params.g(config::encode(e)) > params.theta;
    REQUIRE(sut.run(e, static_cast<std::uint64_t>(i), 0).failure == direct);
    REQUIRE(sut.ground_truth(e) == direct);
  }
}

TEST_CASE("default synthetic threshold hits the requested rate") {
  const auto schema = bundled("parking");
  SyntheticSut sut(schema, default_synthetic_params(schema));
  Rng rng(12345);
  const int n = 20000;
  int fails = 0;
  for (int i = 0; i < n; ++i) fails += sut.ground_truth(config::generate_random(schema, rng)) ? 1 : 0;
  const double rate = static_cast<double>(fails) / n;
  // Binomial sd at n = 2e4 is about 0.002.
  CHECK(std::abs(rate - 0.1) < 0.01);
}

TEST_CASE("noisy synthetic SUT replays under the same seed") {
  const auto schema = bundled("parking");
  SyntheticSut sut(schema, small_synthetic(0.0, 0.7));
  CHECK_FALSE(sut.descriptor().deterministic);
  CHECK(sut.descriptor().runs_per_config == 10);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto e = config::generate_random(schema, rng);
    const auto a = execute(sut, e, 10, 99);
    const auto b = execute(sut, e, 10, 99);
    CHECK(a.run_failed == b.run_failed);
    CHECK(a.trajectories == b.trajectories);
    CHECK(a.failure_probability == static_cast<double>(a.failures) / a.runs);
  }
}

TEST_CASE("noise flips about the requested share of runs") {
  const auto schema = bundled("parking");
  SyntheticSut sut(schema, small_synthetic(0.0, 0.7));
  Rng rng(6);
  int flips = 0, total = 0;
  for (int i = 0; i < 300; ++i) {
    const auto e = config::generate_random(schema, rng);
    const auto o = execute(sut, e, 10, static_cast<std::uint64_t>(i));
    for (bool f : o.run_failed) flips += f != sut.ground_truth(e) ? 1 : 0;
    total += o.runs;
  }
  CHECK(std::abs(static_cast<double>(flips) / total - 0.7) < 0.03);
}

TEST_CASE("synthetic parameters survive JSON including infinities") {
  auto p = small_synthetic(-std::numeric_limits<double>::infinity(), 0.25);
  const auto q = SyntheticParams::from_json(p.to_json());
  CHECK(q.weights == p.weights);
  CHECK(q.scale == p.scale);
  CHECK(std::isinf(q.theta));
  CHECK(q.theta < 0);
  CHECK(q.noise == 0.25);
  auto sut = instantiate(synthetic_sut(p), bundled("parking"));
  CHECK(sut->descriptor().name() == "synthetic");
}

TEST_CASE("parking: goal straight ahead in an empty lot succeeds") {
  ToyParkingSut sut;
  const auto r = sut.run(parking(5, 0.0, {}), 0, 0);
  CHECK_FALSE(r.failure);
  CHECK(r.trajectory.width() == 2);
  const auto& end = r.trajectory.samples.back();
  CHECK(std::hypot(end[0] - 0.0, end[1] - 10.0) <= 0.5);
}

TEST_CASE("parking: reversed heading with both neighbours parked fails") {
  ToyParkingSut sut;
  CHECK(sut.run(parking(5, 0.5, {4, 6}), 0, 0).failure);
  // The same manoeuvre with free neighbours goes through.
  CHECK_FALSE(sut.run(parking(5, 0.5, {}), 0, 0).failure);
}

TEST_CASE("parking: zero timeout fails immediately") {
  ParkingParams p;
  p.timeout_steps = 0;
  ToyParkingSut sut(p);
  const auto r = sut.run(parking(5, 0.0, {}), 0, 0);
  CHECK(r.failure);
  CHECK(r.trajectory.steps() == 1);
}

TEST_CASE("parking: spot geometry") {
  CHECK(parking_spot(5).x == 0.0);
  CHECK(parking_spot(5).y == 10.0);
  CHECK(parking_spot(15).y == -10.0);
  CHECK(parking_spot(15).goal_heading == 0.5);
  CHECK(parking_spot(20).x == 20.0);
  CHECK_THROWS_AS(parking_spot(0), ValidationError);
  CHECK_THROWS_AS(parking_spot(21), ValidationError);
}

TEST_CASE("parking: trajectories never jump and replay exactly") {
  const auto schema = bundled("parking");
  ToyParkingSut sut;
  const ParkingParams p;
  Rng rng(21);
  int fails = 0;
  for (int i = 0; i < 300; ++i) {
    const auto e = config::generate_random(schema, rng);
    const auto a = execute(sut, e, 1, 1);
    const auto b = execute(sut, e, 1, 2);
    REQUIRE(a.trajectories == b.trajectories);
    fails += a.failures;
    const auto& s = a.trajectories[0].samples;
    for (std::size_t t = 1; t < s.size(); ++t)
      REQUIRE(std::hypot(s[t][0] - s[t - 1][0], s[t][1] - s[t - 1][1]) <= p.v_max * p.dt + 1e-12);
  }
  // Failures exist but are not the norm.
  CHECK(fails > 10);
  CHECK(fails < 150);
}

TEST_CASE("parking parameters round-trip through the descriptor") {
  ParkingParams p;
  p.max_steer = 0.5;
  p.timeout_steps = 77;
  const auto q = ParkingParams::from_json(toy_parking_sut(p).params);
  CHECK(q.max_steer == 0.5);
  CHECK(q.timeout_steps == 77);
  CHECK(instantiate(toy_parking_sut(), bundled("parking"))->descriptor().name() == "parking");
}

TEST_CASE("external SUT: conforming stub") {
  ExternalSut sut("while read -r line; do echo '{\"failure\": false, \"trajectory\": [[0]]}'; done",
                  std::chrono::milliseconds(2000));
  const auto o = execute(sut, parking(5, 0.0, {}), 3, 1);
  CHECK(o.runs == 3);
  CHECK(o.failures == 0);
  CHECK(o.trajectories[2].samples == std::vector<std::vector<double>>{{0.0}});
}

TEST_CASE("external SUT: stub sees the configuration") {
  // Fails whenever the request mentions goal_lane 7.
  ExternalSut sut(
      "while read -r line; do case \"$line\" in *'\"goal_lane\":7'*) f=true;; *) f=false;; esac; "
      "echo \"{\\\"failure\\\": $f, \\\"trajectory\\\": [[1, 2], [3, 4]]}\"; done",
      std::chrono::milliseconds(2000));
  CHECK(sut.run(parking(7, 0.0, {}), 1, 0).failure);
  CHECK_FALSE(sut.run(parking(8, 0.0, {}), 1, 0).failure);
  CHECK(sut.run(parking(7, 0.0, {}), 1, 0).trajectory.width() == 2);
}

TEST_CASE("external SUT: reply without failure is a protocol error") {
  ExternalSut sut("while read -r line; do echo '{\"trajectory\": [[0]]}'; done", std::chrono::milliseconds(2000));
  CHECK_THROWS_AS(sut.run(parking(5, 0.0, {}), 1, 0), ProtocolError);
  CHECK_THROWS_AS(sut.run(parking(5, 0.0, {}), 1, 0), ProtocolError);
}

TEST_CASE("external SUT: non-JSON reply is a protocol error") {
  ExternalSut sut("while read -r line; do echo hello; done", std::chrono::milliseconds(2000));
  CHECK_THROWS_AS(sut.run(parking(5, 0.0, {}), 1, 0), ProtocolError);
}

TEST_CASE("external SUT: timeout carries the run index") {
  ExternalSut sut("sleep 5", std::chrono::milliseconds(150));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    sut.run(parking(5, 0.0, {}), 1, 4);
    FAIL("expected a timeout");
  } catch (const TimeoutError& e) {
    CHECK(e.run() == 4);
  }
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(3));
}

TEST_CASE("external SUT: exiting process reports its stderr") {
  ExternalSut sut("read -r line; echo 'simulator exploded' >&2; exit 3", std::chrono::milliseconds(2000));
  try {
    sut.run(parking(5, 0.0, {}), 1, 0);
    FAIL("expected an execution error");
  } catch (const ExecutionError& e) {
    CHECK(std::string(e.what()).find("simulator exploded") != std::string::npos);
  }
}

TEST_CASE("external SUT: invalid runs are excluded from the denominator") {
  // Odd requests crash the child; it is restarted for the next run.
  ExternalSut sut(
      "n=0; while read -r line; do n=$((n+1)); "
      "if [ $n -ge 2 ]; then exit 1; fi; echo '{\"failure\": true, \"trajectory\": [[0]]}'; done",
      std::chrono::milliseconds(2000));
  const auto o = execute(sut, parking(5, 0.0, {}), 4, 1);
  CHECK(o.runs == 2);
  CHECK(o.invalid_runs == 2);
  CHECK(o.errors.size() == 2);
  CHECK(o.seeds.size() == 4);
  CHECK(o.failure_probability == 1.0);
}

TEST_CASE("external SUT: every run invalid rethrows") {
  ExternalSut sut("exit 1", std::chrono::milliseconds(2000));
  CHECK_THROWS_AS(execute(sut, parking(5, 0.0, {}), 3, 1), ExecutionError);
}

TEST_CASE("outcome JSON round trip") {
  const auto schema = bundled("parking");
  SyntheticSut sut(schema, small_synthetic(0.0, 0.3));
  const auto o = execute(sut, parking(3, 0.25, {1, 9}, -2.0, 1.5), 10, 42);
  const auto back = ExecutionOutcome::from_json(schema, o.to_json());
  CHECK(back.config == o.config);
  CHECK(back.runs == o.runs);
  CHECK(back.failures == o.failures);
  CHECK(back.failure_probability == o.failure_probability);
  CHECK(back.run_failed == o.run_failed);
  CHECK(back.seeds == o.seeds);
  CHECK(back.trajectories == o.trajectories);
  CHECK(back.to_json() == o.to_json());
}
