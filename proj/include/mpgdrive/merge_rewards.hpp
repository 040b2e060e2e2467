#pragma once

#include <span>

#include "mpgdrive/merge_world.hpp"

namespace mpgdrive {

/// Weights and constants of the forced-merge reward.
struct MergeRewardSpec {
  double w_speed = 1.0;     // speed tracking
  double w_comfort = 0.5;   // ride comfort
  double w_ttc = 20.0;      // same-lane TTC interaction
  double w_conflict = 20.0; // conflict-point time gap interaction
  double desired_speed = 15.0;
  double rel_speed_threshold = 1.0;  // v_c
  double eps = 0.1;
  double conflict_x = 180.0;
  double tau_s = 3.0;
  /// Arrival times at the conflict point are signed, negative once a vehicle
  /// has passed it. With false the unsigned |x - x_c| / (v + eps) is used, which
  /// mirrors a passed vehicle back in front of the point.
  bool signed_arrival_time = true;

  void validate() const;
};

double speed_tracking_reward(double v, double desired_speed);
double comfort_reward(double u);

/// Pairwise penalty on same-lane proximity, symmetric in (i, j).
double same_lane_ttc_reward(double x_i, double v_i, double x_j, double v_j, const MergeRewardSpec& spec);

/// Pairwise penalty on near-simultaneous arrival at the conflict point, symmetric in (i, j).
/// Both arrival-time conventions agree while the two vehicles are upstream of the point.
double conflict_time_gap_reward(double x_i, double v_i, double x_j, double v_j, const MergeRewardSpec& spec);

/// Agent i's reward: self terms plus interaction terms with every other agent,
/// classified by the lanes stored in `state`.
double agent_reward(const GlobalState& state, std::span<const double> accel, int agent,
                    const MergeRewardSpec& spec);

/// Potential whose discounted sum tracks every agent's unilateral gains.
double potential_function(const GlobalState& state, std::span<const double> accel,
                          const MergeRewardSpec& spec);

/// Per-vehicle partial derivatives of a scalar reward with respect to x, v and u.
struct RewardGradient {
  std::vector<double> dx, dv, du;

  explicit RewardGradient(int n = 0) : dx(n, 0.0), dv(n, 0.0), du(n, 0.0) {}
};

/// Adds weight * d(agent_reward)/d(x, v, u) into `grad`.
void agent_reward_gradient(const GlobalState& state, std::span<const double> accel, int agent,
                           const MergeRewardSpec& spec, double weight, RewardGradient& grad);

/// Adds weight * d(potential_function)/d(x, v, u) into `grad`.
void potential_gradient(const GlobalState& state, std::span<const double> accel, const MergeRewardSpec& spec,
                        double weight, RewardGradient& grad);

}  // namespace mpgdrive
