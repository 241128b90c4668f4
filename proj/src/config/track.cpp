#include "failsearch/config/track.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace failsearch::config::track {

namespace {

bool is_turn(const std::string& cmd, const CommandListSpec& spec) {
  return std::find(spec.turns.begin(), spec.turns.end(), cmd) != spec.turns.end();
}

// Sign convention for turning: the first listed turn command rotates
// counter-clockwise, every other turn command clockwise.
double turn_sign(const std::string& cmd, const CommandListSpec& spec) {
  return !spec.turns.empty() && cmd == spec.turns.front() ? 1.0 : -1.0;
}

double orient(std::pair<double, double> a, std::pair<double, double> b, std::pair<double, double> c) {
  return (b.first - a.first) * (c.second - a.second) - (b.second - a.second) * (c.first - a.first);
}

bool on_segment(std::pair<double, double> a, std::pair<double, double> b, std::pair<double, double> p) {
  return std::min(a.first, b.first) - 1e-12 <= p.first && p.first <= std::max(a.first, b.first) + 1e-12 &&
         std::min(a.second, b.second) - 1e-12 <= p.second && p.second <= std::max(a.second, b.second) + 1e-12;
}

bool segments_intersect(std::pair<double, double> p1, std::pair<double, double> p2,
                        std::pair<double, double> q1, std::pair<double, double> q2) {
  constexpr double eps = 1e-12;
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) &&
      ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)))
    return true;
  if (std::abs(d1) <= eps && on_segment(q1, q2, p1)) return true;
  if (std::abs(d2) <= eps && on_segment(q1, q2, p2)) return true;
  if (std::abs(d3) <= eps && on_segment(p1, p2, q1)) return true;
  if (std::abs(d4) <= eps && on_segment(p1, p2, q2)) return true;
  return false;
}

}  // namespace

std::vector<Curve> curves(const CommandList& track, const CommandListSpec& spec) {
  std::vector<Curve> out;
  double per_unit = 0.0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const auto& cv = track[i];
    if (cv.command == spec.curve_marker) {
      per_unit = cv.value;
    } else if (is_turn(cv.command, spec)) {
      const double rotation = std::abs(per_unit * cv.value);
      if (rotation > 0.0) out.push_back({i, rotation});
    }
  }
  return out;
}

std::vector<std::pair<double, double>> polyline(const CommandList& track, const CommandListSpec& spec) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  double heading = 0.0;
  double per_unit = 0.0;
  double x = 0.0;
  double y = 0.0;
  for (const auto& cv : track) {
    if (cv.command == spec.curve_marker) {
      per_unit = cv.value;
      continue;
    }
    const bool turn = is_turn(cv.command, spec);
    const auto units = static_cast<int>(std::lround(std::max(0.0, cv.value)));
    for (int u = 0; u < units; ++u) {
      if (turn) heading += turn_sign(cv.command, spec) * per_unit * std::numbers::pi / 180.0;
      x += std::cos(heading);
      y += std::sin(heading);
      pts.emplace_back(x, y);
    }
  }
  return pts;
}

bool self_intersects(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 4) return false;
  const std::size_t segs = pts.size() - 1;
  for (std::size_t i = 0; i < segs; ++i)
    for (std::size_t j = i + 2; j < segs; ++j)
      if (segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1])) return true;
  return false;
}

bool no_self_intersection(const CommandList& track, const CommandListSpec& spec) {
  return !self_intersects(polyline(track, spec));
}

}  // namespace failsearch::config::track
