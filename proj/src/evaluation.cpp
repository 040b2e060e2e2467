#include "mpgdrive/evaluation.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

std::vector<ScenarioInstance> sampled_instances(const ScenarioConfig& config, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<GlobalState> states = sample_scenarios(config, count, rng);
  std::vector<ScenarioInstance> out;
  for (int m = 0; m < count; ++m) out.push_back({m, states[m], {}});
  return out;
}

ScenarioMetrics scenario_metrics(const Trajectory& traj, const MergeEnvironment& env) {
  ScenarioMetrics m;
  m.steps = traj.length();
  if (traj.collision) {
    m.ego_collision = traj.collision->first == 0 || traj.collision->second == 0;
    m.other_collision = !m.ego_collision;
  }
  m.failure = !m.ego_collision && traj.final_state.vehicles[0].x < env.scenario.road.conflict_x;

  const VehicleGeometry& g = env.scenario.vehicle;
  double min_d = std::numeric_limits<double>::infinity();
  auto scan = [&](const GlobalState& s) {
    for (int k = 1; k < s.size(); ++k) min_d = std::min(min_d, box_distance(s.vehicles[0], g, s.vehicles[k], g));
  };
  for (const StepRecord& r : traj.steps) scan(r.state);
  scan(traj.final_state);
  m.min_distance = std::isfinite(min_d) ? min_d : 0.0;

  if (m.steps > 0) {
    for (const StepRecord& r : traj.steps) {
      m.mean_speed += r.state.vehicles[0].v;
      m.mean_abs_accel += std::abs(r.accel[0]);
    }
    m.mean_speed /= m.steps;
    m.mean_abs_accel /= m.steps;
  } else {
    m.mean_speed = traj.final_state.vehicles[0].v;
  }
  if (m.steps > 1) {
    for (int t = 1; t < m.steps; ++t) {
      m.mean_abs_jerk += std::abs(traj.steps[t].accel[0] - traj.steps[t - 1].accel[0]) / env.scenario.dt;
    }
    m.mean_abs_jerk /= (m.steps - 1);
  }
  return m;
}

namespace {

const PolicyNetwork& member(const PolicySource& src, std::size_t seed_index) {
  if (!src.bundle || src.bundle->members.empty()) throw ConfigError("evaluation: network policy without parameters");
  return src.bundle->members[seed_index % src.bundle->members.size()];
}

Controller controller_for(const PolicySource& src, std::size_t seed_index, const ScenarioInstance& sc, int vehicle) {
  switch (src.kind) {
    case PolicyKind::kNetwork:
      return Controller::net(member(src, seed_index));
    case PolicyKind::kIdm:
      return Controller::idm();
    case PolicyKind::kConstant:
      return Controller::constant();
    case PolicyKind::kReplay:
      if (static_cast<int>(sc.replay.size()) <= vehicle || sc.replay[vehicle].empty()) {
        throw ConfigError("evaluation: scenario " + std::to_string(sc.id) + " has no recording for vehicle " +
                          std::to_string(vehicle));
      }
      return Controller::recorded(sc.replay[vehicle]);
  }
  return Controller::constant();
}

}  // namespace

MetricsReport run_evaluation(const MergeEnvironment& env, const PolicySource& ego, const PolicySource& others,
                             const std::vector<ScenarioInstance>& scenarios, const std::vector<std::uint64_t>& seeds,
                             const std::function<void(const ScenarioInstance&, std::uint64_t, const Trajectory&)>&
                                 on_trajectory) {
  if (scenarios.empty()) throw ConfigError("evaluation: empty scenario list");
  if (seeds.empty()) throw ConfigError("evaluation: at least one seed required");
  if (ego.kind == PolicyKind::kReplay) throw ConfigError("evaluation: the ego cannot be replayed");
  MetricsReport rep;
  rep.scenarios = static_cast<int>(scenarios.size());
  rep.seeds = seeds;
  double pooled_speed = 0.0;
  long pooled_steps = 0;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    for (const ScenarioInstance& sc : scenarios) {
      const int n = sc.initial.size();
      std::vector<Controller> ctl;
      ctl.reserve(n);
      ctl.push_back(controller_for(ego, si, sc, 0));
      for (int k = 1; k < n; ++k) ctl.push_back(controller_for(others, si, sc, k));
      Trajectory traj = rollout(env, ctl, sc.initial);
      traj.scenario_id = sc.id;
      traj.seed = seeds[si];
      ScenarioMetrics m = scenario_metrics(traj, env);
      m.id = sc.id;
      m.seed = seeds[si];
      for (const StepRecord& r : traj.steps) pooled_speed += r.state.vehicles[0].v;
      pooled_steps += traj.length();
      if (on_trajectory) on_trajectory(sc, seeds[si], traj);
      rep.per_scenario.push_back(m);
    }
  }
  const double runs = static_cast<double>(rep.per_scenario.size());
  for (const ScenarioMetrics& m : rep.per_scenario) {
    rep.collisions += m.ego_collision ? 1.0 : 0.0;
    rep.failures += m.failure ? 1.0 : 0.0;
    rep.avg_min_distance += m.min_distance;
    rep.avg_ego_speed += m.mean_speed;
    rep.avg_accel_magnitude += m.mean_abs_accel;
    rep.avg_jerk_magnitude += m.mean_abs_jerk;
  }
  rep.collisions /= static_cast<double>(seeds.size());
  rep.failures /= static_cast<double>(seeds.size());
  rep.collision_rate = rep.collisions / rep.scenarios;
  rep.failure_rate = rep.failures / rep.scenarios;
  rep.avg_min_distance /= runs;
  rep.avg_ego_speed /= runs;
  rep.avg_accel_magnitude /= runs;
  rep.avg_jerk_magnitude /= runs;
  rep.avg_ego_speed_pooled = pooled_steps > 0 ? pooled_speed / pooled_steps : rep.avg_ego_speed;
  return rep;
}

}  // namespace mpgdrive
