#pragma once

#include <vector>

#include "mpgdrive/merge_rewards.hpp"
#include "mpgdrive/tabular_game.hpp"

namespace mpgdrive {

/// Evenly spaced bin centres from lo to hi inclusive.
struct Grid {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;

  double centre(int k) const { return count == 1 ? lo : lo + (hi - lo) * k / (count - 1); }
  /// Tent weights of a value on the grid; values outside [lo, hi] go to the end bins.
  std::vector<double> weights(double value) const;
};

/// A two-vehicle merge reduced to a finite game: agent 0 starts on the ramp
/// and agent 1 drives in the target lane. Each local state is a (position,
/// speed) bin; an action is one of `accels` held for `dt`.
struct MergeAbstractionConfig {
  Grid ramp_x{140.0, 200.0, 4};
  Grid target_x{140.0, 200.0, 4};
  Grid speed{8.0, 20.0, 3};
  std::vector<double> accels{-2.0, 0.0, 2.0};
  double dt = 1.0;
  double gamma = 0.9;
  MergeRewardSpec reward;
};

struct MergeAbstraction {
  tabular::TabularGame game;
  /// potential_function evaluated on every (state, joint action) of the game.
  tabular::StatePotential potential;
};

/// Transitions move each vehicle's bin centre one kinematic step and spread the
/// result over neighbouring bins; rewards and the potential are the merge
/// reward functions evaluated at the bin centres.
MergeAbstraction export_merge_abstraction(const MergeAbstractionConfig& config = {});

}  // namespace mpgdrive
