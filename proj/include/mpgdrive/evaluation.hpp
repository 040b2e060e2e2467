#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mpgdrive/rollout.hpp"

namespace mpgdrive {

enum class PolicyKind { kNetwork, kIdm, kConstant, kReplay };

/// Which controller drives a group of vehicles. Network policies take the
/// bundle member of the current seed (cycling when there are fewer members).
struct PolicySource {
  PolicyKind kind = PolicyKind::kConstant;
  const PolicyBundle* bundle = nullptr;
};

/// The constant-speed baseline: zero acceleration everywhere.
inline double constant_speed_policy() { return 0.0; }

/// An initial state plus, for replayed vehicles, their recorded motion.
struct ScenarioInstance {
  int id = 0;
  GlobalState initial;
  /// replay[k] is vehicle k's recording sampled every dt; empty for the ego.
  std::vector<std::vector<VehicleState>> replay;
};

std::vector<ScenarioInstance> sampled_instances(const ScenarioConfig& config, int count, std::uint64_t seed);

struct ScenarioMetrics {
  int id = 0;
  std::uint64_t seed = 0;
  bool ego_collision = false;
  bool other_collision = false;
  bool failure = false;
  double min_distance = 0.0;  // ego to any vehicle, bounding-box closest points
  double mean_speed = 0.0;
  double mean_abs_accel = 0.0;
  double mean_abs_jerk = 0.0;
  int steps = 0;
};

struct MetricsReport {
  int scenarios = 0;
  std::vector<std::uint64_t> seeds;
  double collisions = 0.0;  // ego-involved collisions per seed, averaged over seeds
  double failures = 0.0;
  double collision_rate = 0.0;  // collisions / scenarios
  double failure_rate = 0.0;
  double avg_min_distance = 0.0;
  double avg_ego_speed = 0.0;         // per-scenario time average, then mean
  double avg_ego_speed_pooled = 0.0;  // mean over every recorded step
  double avg_accel_magnitude = 0.0;
  double avg_jerk_magnitude = 0.0;
  std::vector<ScenarioMetrics> per_scenario;
};

ScenarioMetrics scenario_metrics(const Trajectory& traj, const MergeEnvironment& env);

/// Rolls out every scenario once per seed with the ego driven by `ego` and all
/// other vehicles by `others`, then folds the metrics in scenario order.
MetricsReport run_evaluation(const MergeEnvironment& env, const PolicySource& ego, const PolicySource& others,
                             const std::vector<ScenarioInstance>& scenarios, const std::vector<std::uint64_t>& seeds,
                             const std::function<void(const ScenarioInstance&, std::uint64_t, const Trajectory&)>&
                                 on_trajectory = {});

}  // namespace mpgdrive
