#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mpgdrive/dynamics.hpp"

namespace mpgdrive {

enum class Lane : std::uint8_t { kTarget = 0, kRamp = 1 };

/// Single target lane plus one on-ramp meeting it at the conflict point.
struct RoadGeometry {
  double conflict_x = 180.0;
  double lane_width = 3.7;
  double target_y = 0.0;

  double ramp_y() const { return target_y - lane_width; }
  double lane_y(Lane lane) const { return lane == Lane::kRamp ? ramp_y() : target_y; }
};

/// Joint state of every player. Index 0 is the ego by convention.
struct GlobalState {
  std::vector<VehicleState> vehicles;
  std::vector<Lane> lanes;

  int size() const { return static_cast<int>(vehicles.size()); }
  bool operator==(const GlobalState&) const = default;
};

/// Moves every ramp vehicle that reached the conflict point into the target
/// lane. Returns a per-vehicle flag telling which vehicles merged now.
std::vector<bool> apply_merge(GlobalState& state, const RoadGeometry& road);

struct NeighborPair {
  std::optional<int> leader;
  std::optional<int> follower;
};

enum class NeighborScope {
  /// Only vehicles in the same lane.
  kSameLane,
  /// Every vehicle in the merge corridor (ramp and target lane projected onto one axis).
  kCorridor,
};

/// Nearest vehicle ahead and behind in longitudinal order. Equal positions
/// are broken by index: the lower index counts as ahead.
NeighborPair find_neighbors(const GlobalState& state, int agent, NeighborScope scope);

}  // namespace mpgdrive
