#include "mpgdrive/merge_world.hpp"

namespace mpgdrive {

std::vector<bool> apply_merge(GlobalState& state, const RoadGeometry& road) {
  std::vector<bool> merged(state.vehicles.size(), false);
  for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
    if (state.lanes[i] == Lane::kRamp && state.vehicles[i].x >= road.conflict_x) {
      state.lanes[i] = Lane::kTarget;
      state.vehicles[i].y = road.target_y;
      merged[i] = true;
    }
  }
  return merged;
}

NeighborPair find_neighbors(const GlobalState& state, int agent, NeighborScope scope) {
  NeighborPair out;
  auto ahead = [&](int j, int k) {
    // true when j is ahead of k
    const double xj = state.vehicles[j].x, xk = state.vehicles[k].x;
    return xj > xk || (xj == xk && j < k);
  };
  for (int j = 0; j < state.size(); ++j) {
    if (j == agent) continue;
    if (scope == NeighborScope::kSameLane && state.lanes[j] != state.lanes[agent]) continue;
    if (ahead(j, agent)) {
      if (!out.leader || ahead(*out.leader, j)) out.leader = j;
    } else {
      if (!out.follower || ahead(j, *out.follower)) out.follower = j;
    }
  }
  return out;
}

}  // namespace mpgdrive
