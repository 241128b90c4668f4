#include "failsearch/error.hpp"
#include "failsearch/executor.hpp"

#include <cmath>
#include <numbers>

namespace failsearch::exec {

using nlohmann::json;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Wrap to [-0.5, 0.5) revolutions.
double wrap_rev(double r) { return r - std::floor(r + 0.5); }

double wrap_rad(double a) { return a - kTau * std::floor(a / kTau + 0.5); }

const config::ParameterValue& named(const EnvConfiguration& c, const char* name) {
  const auto i = c.schema().index_of(name);
  if (!i) throw SchemaMismatch(std::string("parking SUT needs parameter '") + name + "'");
  return c.value(*i);
}

bool disc_hits_box(double px, double py, double r, double bx, double by, double hw, double hd) {
  const double dx = std::max(std::abs(px - bx) - hw, 0.0);
  const double dy = std::max(std::abs(py - by) - hd, 0.0);
  return dx * dx + dy * dy < r * r;
}

}  // namespace

SpotGeometry parking_spot(int spot) {
  if (spot < 1 || spot > 20) throw ValidationError("parking spot must lie in [1, 20]");
  if (spot <= 10) return {4.0 * (spot - 5), 10.0, 0.0};
  return {4.0 * (spot - 15), -10.0, 0.5};
}

json ParkingParams::to_json() const {
  return {{"dt", dt},
          {"v_max", v_max},
          {"wheelbase", wheelbase},
          {"max_steer", max_steer},
          {"steer_gain", steer_gain},
          {"approach_offset", approach_offset},
          {"switch_radius", switch_radius},
          {"lookahead", lookahead},
          {"ego_radius", ego_radius},
          {"spot_half_width", spot_half_width},
          {"spot_half_depth", spot_half_depth},
          {"position_tolerance", position_tolerance},
          {"heading_tolerance", heading_tolerance},
          {"timeout_steps", timeout_steps}};
}

ParkingParams ParkingParams::from_json(const json& doc) {
  ParkingParams p;
  try {
    p.dt = doc.value("dt", p.dt);
    p.v_max = doc.value("v_max", p.v_max);
    p.wheelbase = doc.value("wheelbase", p.wheelbase);
    p.max_steer = doc.value("max_steer", p.max_steer);
    p.steer_gain = doc.value("steer_gain", p.steer_gain);
    p.approach_offset = doc.value("approach_offset", p.approach_offset);
    p.switch_radius = doc.value("switch_radius", p.switch_radius);
    p.lookahead = doc.value("lookahead", p.lookahead);
    p.ego_radius = doc.value("ego_radius", p.ego_radius);
    p.spot_half_width = doc.value("spot_half_width", p.spot_half_width);
    p.spot_half_depth = doc.value("spot_half_depth", p.spot_half_depth);
    p.position_tolerance = doc.value("position_tolerance", p.position_tolerance);
    p.heading_tolerance = doc.value("heading_tolerance", p.heading_tolerance);
    p.timeout_steps = doc.value("timeout_steps", p.timeout_steps);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed parking SUT parameters: ") + e.what());
  }
  return p;
}

ToyParkingSut::ToyParkingSut(ParkingParams params) : params_(params), descriptor_(toy_parking_sut(params)) {
  if (!(params_.dt > 0 && params_.v_max > 0 && params_.wheelbase > 0 && params_.max_steer > 0) ||
      params_.timeout_steps < 0)
    throw ValidationError("parking SUT constants must be positive");
}

RunResult ToyParkingSut::run(const EnvConfiguration& config, std::uint64_t, int) {
  const auto& p = params_;
  const int goal = static_cast<int>(std::get<std::int64_t>(named(config, "goal_lane")));
  const double heading0 = std::get<double>(named(config, "head_ego"));
  const auto& parked = std::get<config::IndexSet>(named(config, "pvehicles"));
  const auto& pos = std::get<config::RealVector>(named(config, "pos_ego"));

  const auto spot = parking_spot(goal);
  const double side = spot.y > 0 ? 1.0 : -1.0;  // +1 top row
  const double ax = spot.x, ay = spot.y - side * p.approach_offset;

  double x = pos[0], y = pos[1];
  double psi = std::numbers::pi / 2 + kTau * heading0;  // world angle of the nose
  RunResult out;
  out.trajectory.samples.push_back({x, y});

  auto collides = [&] {
    for (int s : parked) {
      if (s == goal) continue;
      const auto b = parking_spot(s);
      if (disc_hits_box(x, y, p.ego_radius, b.x, b.y, p.spot_half_width, p.spot_half_depth)) return true;
    }
    return false;
  };
  auto parked_ok = [&] {
    const double heading = (psi - std::numbers::pi / 2) / kTau;
    return std::hypot(x - spot.x, y - spot.y) <= p.position_tolerance &&
           std::abs(wrap_rev(heading - spot.goal_heading)) <= p.heading_tolerance;
  };

  if (collides()) {
    out.failure = true;
    return out;
  }
  bool approached = false;
  for (int step = 0; step < p.timeout_steps; ++step) {
    if (parked_ok()) return out;
    if (!approached && (std::hypot(x - ax, y - ay) < p.switch_radius || side * (y - ay) >= 0.0)) approached = true;
    double tx = ax, ty = ay;
    if (approached) {
      // Follow the spot's centre line with a fixed lookahead.
      tx = spot.x;
      ty = y + side * p.lookahead;
    }
    const double err = wrap_rad(std::atan2(ty - y, tx - x) - psi);
    const double steer = std::clamp(p.steer_gain * err, -p.max_steer, p.max_steer);
    const double v = approached ? std::clamp(std::abs(spot.y - y), 0.2, p.v_max) : p.v_max;

    x += v * std::cos(psi) * p.dt;
    y += v * std::sin(psi) * p.dt;
    psi = wrap_rad(psi + v / p.wheelbase * std::tan(steer) * p.dt);
    out.trajectory.samples.push_back({x, y});
    if (collides()) {
      out.failure = true;
      return out;
    }
  }
  out.failure = !parked_ok();
  return out;
}

SutDescriptor toy_parking_sut(const ParkingParams& params) {
  SutDescriptor d;
  d.kind = SutDescriptor::Kind::ToyParking;
  d.deterministic = true;
  d.runs_per_config = 1;
  d.params = params.to_json();
  return d;
}

}  // namespace failsearch::exec
