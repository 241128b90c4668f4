#pragma once

#include "failsearch/config/configuration.hpp"
#include "failsearch/random.hpp"

#include <chrono>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

namespace failsearch::exec {

using config::EnvConfiguration;

struct Trajectory {
  std::vector<std::vector<double>> samples;  // time-ordered, equal widths

  std::size_t steps() const noexcept { return samples.size(); }
  std::size_t width() const noexcept { return samples.empty() ? 0 : samples.front().size(); }
  void check() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct RunResult {
  bool failure = false;
  Trajectory trajectory;
};

struct ExecutionOutcome {
  explicit ExecutionOutcome(EnvConfiguration c) : config(std::move(c)) {}

  EnvConfiguration config;
  int runs = 0;  // valid runs only
  int failures = 0;
  double failure_probability = 0.0;
  std::vector<Trajectory> trajectories;   // one per valid run
  std::vector<bool> run_failed;           // one per valid run
  std::vector<std::uint64_t> seeds;       // one per attempted run
  int invalid_runs = 0;
  std::vector<std::string> errors;        // one per invalid run

  nlohmann::json to_json() const;
  static ExecutionOutcome from_json(const config::SchemaPtr& schema, const nlohmann::json& doc);
};

// Strictly above one half.
bool is_failure(const ExecutionOutcome& outcome);

struct SutDescriptor {
  enum class Kind { Synthetic, ToyParking, External };
  Kind kind = Kind::Synthetic;
  bool deterministic = true;
  int runs_per_config = 1;
  nlohmann::json params;

  std::string name() const;
  nlohmann::json to_json() const;
};

class SystemUnderTest {
public:
  virtual ~SystemUnderTest() = default;
  virtual const SutDescriptor& descriptor() const = 0;
  // One episode. Throws ExecutionError (or a subclass) when the run itself
  // could not be carried out.
  virtual RunResult run(const EnvConfiguration& config, std::uint64_t seed, int run_index) = 0;
};

// Runs `runs` episodes with seeds derived from `seed`. Runs that throw
// ExecutionError are recorded as invalid and excluded from the denominator;
// if every run is invalid the first error is rethrown.
ExecutionOutcome execute(SystemUnderTest& sut, const EnvConfiguration& config, int runs, std::uint64_t seed);

// ---- synthetic analytic SUT ------------------------------------------------
//
// Features are standardized, z_k = (x_k - mean_k) / scale_k, and
//   g(e) = sum_k w_k z_k + c * z_a * z_b.
// An episode fails iff g(e) > theta, flipped with probability `noise`. The
// trajectory is 20 samples of (g - theta) * exp(-0.2 t).
struct SyntheticParams {
  std::vector<double> weights, mean, scale;
  std::size_t a = 0, b = 1;
  double c = 0.0;
  double theta = 0.0;
  double noise = 0.0;

  double g(const std::vector<double>& features) const;
  nlohmann::json to_json() const;
  static SyntheticParams from_json(const nlohmann::json& doc);
};

// Documented default for a schema: weights and the pair coefficient drawn
// from a fixed stream, feature statistics and theta from a fixed-seed Monte
// Carlo estimate so that about `failure_rate` of random configurations fail.
SyntheticParams default_synthetic_params(const config::SchemaPtr& schema, double failure_rate = 0.1,
                                         double noise = 0.0, std::size_t samples = 100000);

class SyntheticSut : public SystemUnderTest {
public:
  SyntheticSut(config::SchemaPtr schema, SyntheticParams params);
  const SutDescriptor& descriptor() const override { return descriptor_; }
  RunResult run(const EnvConfiguration& config, std::uint64_t seed, int run_index) override;
  bool ground_truth(const EnvConfiguration& config) const;
  const SyntheticParams& params() const noexcept { return params_; }

private:
  config::SchemaPtr schema_;
  SyntheticParams params_;
  SutDescriptor descriptor_;
};

SutDescriptor synthetic_sut(const SyntheticParams& params);

// ---- toy parking SUT -------------------------------------------------------
//
// Two rows of ten spots. Spot k in 1..10 is centred at (4(k-5), +10), spot
// k in 11..20 at (4(k-15), -10). Heading is in revolutions, counter-clockwise,
// 0 facing +y. The ego is a kinematic bicycle driven forward by a two-stage
// proportional controller: first to an aisle point in front of the goal
// spot, then into the spot. Failure: the ego disc touches an occupied spot's
// box, or the goal pose is not reached before the timeout.
struct ParkingParams {
  double dt = 0.1;
  double v_max = 2.0;
  double wheelbase = 2.5;
  double max_steer = 0.75;       // radians
  double steer_gain = 2.0;       // radians of steering per radian of heading error
  double approach_offset = 7.0;  // aisle point distance in front of the spot
  double switch_radius = 1.0;    // distance to the aisle point that starts the final leg
  double lookahead = 2.0;        // along the spot axis, final leg
  double ego_radius = 1.2;
  double spot_half_width = 1.9;  // parked car box, x half extent
  double spot_half_depth = 2.0;  // parked car box, y half extent
  double position_tolerance = 0.5;
  double heading_tolerance = 0.05;  // revolutions
  int timeout_steps = 300;

  nlohmann::json to_json() const;
  static ParkingParams from_json(const nlohmann::json& doc);
};

struct SpotGeometry {
  double x, y;
  double goal_heading;  // revolutions
};
SpotGeometry parking_spot(int spot);

class ToyParkingSut : public SystemUnderTest {
public:
  explicit ToyParkingSut(ParkingParams params = {});
  const SutDescriptor& descriptor() const override { return descriptor_; }
  RunResult run(const EnvConfiguration& config, std::uint64_t seed, int run_index) override;

private:
  ParkingParams params_;
  SutDescriptor descriptor_;
};

SutDescriptor toy_parking_sut(const ParkingParams& params = {});

// ---- external process ------------------------------------------------------
//
// Wire protocol, one exchange per run over the child's standard streams:
//   -> {"config": {...}, "seed": n}\n
//   <- {"failure": bool, "trajectory": [[...], ...]}\n
// The child is started on the first run and restarted after any error.
class ExternalSut : public SystemUnderTest {
public:
  ExternalSut(std::string command, std::chrono::milliseconds timeout);
  ~ExternalSut() override;
  ExternalSut(const ExternalSut&) = delete;
  ExternalSut& operator=(const ExternalSut&) = delete;

  const SutDescriptor& descriptor() const override { return descriptor_; }
  RunResult run(const EnvConfiguration& config, std::uint64_t seed, int run_index) override;

private:
  void start();
  void stop();
  std::string stderr_excerpt();

  std::string command_;
  std::chrono::milliseconds timeout_;
  SutDescriptor descriptor_;
  int pid_ = -1;
  int to_child_ = -1, from_child_ = -1, err_child_ = -1;
  std::string buffer_;
};

SutDescriptor external_sut(const std::string& command, std::chrono::milliseconds timeout,
                           bool deterministic = false);

// Fresh SUT instance for a descriptor; campaigns create one per worker.
std::unique_ptr<SystemUnderTest> instantiate(const SutDescriptor& descriptor, const config::SchemaPtr& schema);

}  // namespace failsearch::exec
