#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mpgdrive/dynamics.hpp"
#include "mpgdrive/merge_world.hpp"

namespace mpgdrive {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Player set, horizon and initial-state distribution of the forced merge.
///
/// Vehicle 0 is the ramp ego. Vehicles 1..leaders start ahead of it in the
/// target lane, the remaining ones behind it. Leader k (and follower k) is
/// placed in the k-th slot of length `slot_length` measured from the ego.
struct ScenarioConfig {
  int leaders = 4;
  int followers = 4;
  double dt = 0.1;
  double horizon = 30.0;
  double gamma = 0.99;
  Range ego_x{100.0, 140.0};
  Range speed{10.0, 20.0};
  double slot_length = 25.0;
  double min_headway = 7.0;
  double min_ttc = 4.0;
  int rejection_cap = 1000;
  RoadGeometry road;
  VehicleGeometry vehicle;

  int n_agents() const { return 1 + leaders + followers; }
  int steps() const;
  void validate() const;
};

/// Headway and TTC of every successive pair in longitudinal order across both lanes.
bool satisfies_initial_constraints(const GlobalState& state, const ScenarioConfig& config);

/// One initial state (a stratified batch of size one).
GlobalState sample_initial_states(const ScenarioConfig& config, std::mt19937_64& rng);

/// Latin-hypercube batch over the ego position and every vehicle's speed;
/// neighbour positions are uniform within their slots. Violating draws are
/// resampled within the same strata, then anywhere once half the cap is spent.
std::vector<GlobalState> sample_scenarios(const ScenarioConfig& config, int count, std::mt19937_64& rng);

}  // namespace mpgdrive
