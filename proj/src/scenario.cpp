#include "mpgdrive/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

int ScenarioConfig::steps() const { return static_cast<int>(std::lround(horizon / dt)); }

void ScenarioConfig::validate() const {
  if (leaders < 0 || followers < 0) throw ConfigError("scenario: negative neighbour count");
  if (!(dt > 0.0)) throw ConfigError("scenario: dt must be positive");
  if (!(horizon >= dt)) throw ConfigError("scenario: horizon shorter than one step");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("scenario: gamma must lie in [0, 1)");
  if (!(ego_x.lo <= ego_x.hi) || !(speed.lo <= speed.hi)) throw ConfigError("scenario: empty sampling range");
  if (!(speed.lo >= 0.0 && speed.hi <= kMaxSpeed)) throw ConfigError("scenario: speeds must lie in [0, 30]");
  if (!(slot_length > 0.0)) throw ConfigError("scenario: slot length must be positive");
  if (!(min_headway > 0.0 && min_ttc > 0.0)) throw ConfigError("scenario: headway and TTC minima must be positive");
  if (rejection_cap < 1) throw ConfigError("scenario: rejection cap must be positive");
  vehicle.validate();
}

bool satisfies_initial_constraints(const GlobalState& state, const ScenarioConfig& config) {
  std::vector<int> order(state.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return state.vehicles[a].x > state.vehicles[b].x || (state.vehicles[a].x == state.vehicles[b].x && a < b);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const VehicleState& lead = state.vehicles[order[k - 1]];
    const VehicleState& follow = state.vehicles[order[k]];
    const double headway = lead.x - follow.x;
    if (headway < config.min_headway) return false;
    const double gap = std::max(headway - config.vehicle.body_length, 0.0);
    if (time_to_collision(gap, follow.v - lead.v) < config.min_ttc) return false;
  }
  return true;
}

namespace {

GlobalState place(const ScenarioConfig& c, const std::vector<double>& strata_u, const std::vector<double>& slot_u) {
  const int n = c.n_agents();
  GlobalState s;
  s.vehicles.resize(n);
  s.lanes.assign(n, Lane::kTarget);
  s.lanes[0] = Lane::kRamp;
  const double ego_x = c.ego_x.lo + strata_u[0] * (c.ego_x.hi - c.ego_x.lo);
  for (int i = 0; i < n; ++i) {
    VehicleState& v = s.vehicles[i];
    v.v = c.speed.lo + strata_u[1 + i] * (c.speed.hi - c.speed.lo);
    v.y = c.road.lane_y(s.lanes[i]);
    if (i == 0) {
      v.x = ego_x;
    } else if (i <= c.leaders) {
      v.x = ego_x + (i - 1 + slot_u[i - 1]) * c.slot_length;
    } else {
      v.x = ego_x - (i - 1 - c.leaders + slot_u[i - 1]) * c.slot_length;
    }
  }
  return s;
}

}  // namespace

std::vector<GlobalState> sample_scenarios(const ScenarioConfig& config, int count, std::mt19937_64& rng) {
  config.validate();
  if (count < 1) throw ConfigError("scenario: batch size must be positive");
  const int n = config.n_agents();
  const int dims = 1 + n;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // cells[d][m]: stratum of scenario m along dimension d
  std::vector<std::vector<int>> cells(dims, std::vector<int>(count));
  for (auto& column : cells) {
    std::iota(column.begin(), column.end(), 0);
    std::shuffle(column.begin(), column.end(), rng);
  }

  std::vector<GlobalState> out;
  out.reserve(count);
  std::vector<double> strata_u(dims), slot_u(n - 1);
  for (int m = 0; m < count; ++m) {
    bool accepted = false;
    for (int attempt = 0; attempt < config.rejection_cap && !accepted; ++attempt) {
      const bool stratified = attempt < (config.rejection_cap + 1) / 2;
      for (int d = 0; d < dims; ++d) {
        strata_u[d] = stratified ? (cells[d][m] + uni(rng)) / count : uni(rng);
      }
      for (double& u : slot_u) u = uni(rng);
      GlobalState s = place(config, strata_u, slot_u);
      if (satisfies_initial_constraints(s, config)) {
        out.push_back(std::move(s));
        accepted = true;
      }
    }
    if (!accepted) {
      throw ConfigError("scenario: no initial state met the headway/TTC constraints within " +
                        std::to_string(config.rejection_cap) + " draws; sampling ranges are infeasible");
    }
  }
  return out;
}

GlobalState sample_initial_states(const ScenarioConfig& config, std::mt19937_64& rng) {
  return sample_scenarios(config, 1, rng).front();
}

}  // namespace mpgdrive
