#pragma once

#include "failsearch/config/schema.hpp"

#include <utility>
#include <vector>

// Geometry for command-value track descriptions: straight units advance one
// unit of length, turn units rotate by the active per-unit angle and then
// advance one unit. The curve marker command sets the per-unit angle.
namespace failsearch::config::track {

struct Curve {
  std::size_t pair_index = 0;
  double rotation_degrees = 0.0;  // absolute rotation over the whole turn
};

std::vector<Curve> curves(const CommandList& track, const CommandListSpec& spec);

std::vector<std::pair<double, double>> polyline(const CommandList& track, const CommandListSpec& spec);

// True when two non-adjacent segments of the polyline intersect.
bool self_intersects(const std::vector<std::pair<double, double>>& points);

// Registered as "track-no-self-intersection".
bool no_self_intersection(const CommandList& track, const CommandListSpec& spec);

}  // namespace failsearch::config::track
