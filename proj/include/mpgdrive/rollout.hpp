#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mpgdrive/idm.hpp"
#include "mpgdrive/merge_rewards.hpp"
#include "mpgdrive/policy_net.hpp"
#include "mpgdrive/scenario.hpp"

namespace mpgdrive {

/// Everything a merge rollout needs besides the controllers.
struct MergeEnvironment {
  ScenarioConfig scenario;
  MergeRewardSpec reward;
  IdmParams idm;
  /// Project network actions of target-lane vehicles onto the TTC-feasible interval.
  bool feasibility = true;
  /// Also project ramp vehicles, against their neighbours in the merge corridor.
  bool ramp_feasibility = true;

  ObservationSpec observation() const;
  void validate() const;
};

enum class ControllerKind { kNetwork, kIdm, kConstant, kReplay };

struct Controller {
  ControllerKind kind = ControllerKind::kConstant;
  const PolicyNetwork* network = nullptr;
  /// Recorded states sampled every dt; entry t is the state at step t.
  const std::vector<VehicleState>* replay = nullptr;

  static Controller net(const PolicyNetwork& n) { return {ControllerKind::kNetwork, &n, nullptr}; }
  static Controller idm() { return {ControllerKind::kIdm, nullptr, nullptr}; }
  static Controller constant() { return {ControllerKind::kConstant, nullptr, nullptr}; }
  static Controller recorded(const std::vector<VehicleState>& r) { return {ControllerKind::kReplay, nullptr, &r}; }
};

struct StepRecord {
  GlobalState state;
  std::vector<double> accel;         // applied
  std::vector<double> policy_accel;  // before feasibility projection
  std::vector<double> rewards;
  double potential = 0.0;
};

enum class Termination { kHorizon, kCollision };

struct Trajectory {
  std::vector<StepRecord> steps;
  GlobalState final_state;
  Termination cause = Termination::kHorizon;
  std::optional<std::pair<int, int>> collision;
  int scenario_id = 0;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(steps.size()); }
};

/// Steps all vehicles simultaneously until the horizon or the first overlap.
/// The overlap check runs before each step, and once on the final state.
Trajectory rollout(const MergeEnvironment& env, const std::vector<Controller>& controllers, const GlobalState& s0);

/// Every vehicle driven by the same network.
std::vector<Controller> shared_policy_controllers(const PolicyNetwork& net, int n_agents);

/// sum_t gamma^t * potential_t
double total_potential(const Trajectory& traj, double gamma);

/// sum_t gamma^t * reward_t of one agent
double total_agent_reward(const Trajectory& traj, int agent, double gamma);

struct Objective {
  enum class Kind { kPotential, kAgentReward } kind = Kind::kPotential;
  int agent = 0;

  static Objective potential() { return {}; }
  static Objective agent_reward(int i) { return {Kind::kAgentReward, i}; }
};

struct RolloutGradient {
  Trajectory trajectory;
  double objective = 0.0;
  /// d(objective)/d(trainable network parameters)
  Eigen::VectorXd grad;
};

/// Reverse-mode derivative of the discounted objective through the
/// deterministic rollout: dynamics, reward terms, observations, the network,
/// feasibility bounds and IDM responses. Clamps pass the gradient only where
/// inactive. Steering is held at zero, so only positions and speeds carry adjoints.
RolloutGradient rollout_gradient(const MergeEnvironment& env, const std::vector<Controller>& controllers,
                                 const GlobalState& s0, const PolicyNetwork& trainable, const Objective& objective);

}  // namespace mpgdrive
