#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mpgdrive/policy_net.hpp"
#include "mpgdrive/rollout.hpp"

namespace mpgdrive {

struct TrainerConfig {
  int epochs = 600;
  int batch_size = 32;
  /// Draw a new batch every epoch; otherwise train on the frozen batch.
  bool fresh_batch = true;
  int frozen_batch_size = 32;
  int probe_states = 256;
  double learning_rate = 5e-2;
  /// Step size learning_rate / (1 + epoch / lr_decay_epochs); 0 keeps it constant.
  double lr_decay_epochs = 15.0;
  double grad_clip = 10.0;
  /// Rescale each scenario's gradient to at most this norm before averaging; 0 disables.
  double scenario_clip = 10.0;
  int hidden1 = 64;
  int hidden2 = 64;
  double negative_slope = 0.01;
  int workers = 1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool record_wall_time = false;

  void validate() const;
};

enum class TrainingMode {
  /// Every vehicle runs the shared network; ascend the total potential.
  kPotential,
  /// Only the ego runs the network, the others follow IDM; ascend the ego's own return.
  kSingleAgent,
};

struct EpochLog {
  std::uint64_t seed = 0;
  int epoch = 0;
  double mean_objective = 0.0;    // over this epoch's training batch
  double frozen_objective = 0.0;  // over the frozen batch
  double action_difference = 0.0; // between the policies before and after this epoch's update
  double grad_norm = 0.0;
  double step_size = 0.0;
  int collisions = 0;             // in the training batch
  std::optional<double> wall_time;
};

struct TrainResult {
  PolicyBundle bundle;
  std::vector<EpochLog> logs;
};

/// Controllers for one scenario under a training mode.
std::vector<Controller> training_controllers(const PolicyNetwork& net, int n_agents, TrainingMode mode);

struct BatchGradient {
  double mean_objective = 0.0;
  Eigen::VectorXd grad;
  int collisions = 0;
};

/// Mean objective and its gradient over a batch of initial states, reduced in batch order.
/// A positive `scenario_clip` bounds the norm of each scenario's contribution.
BatchGradient potential_gradient(const MergeEnvironment& env, const PolicyNetwork& net,
                                 const std::vector<GlobalState>& batch, TrainingMode mode = TrainingMode::kPotential,
                                 int workers = 1, double scenario_clip = 0.0);

/// Mean objective over a batch without gradients.
double mean_objective(const MergeEnvironment& env, const PolicyNetwork& net, const std::vector<GlobalState>& batch,
                      TrainingMode mode = TrainingMode::kPotential);

/// Mean over probe states and listed agents of the squared difference of the network actions.
double mean_squared_action_difference(const PolicyNetwork& a, const PolicyNetwork& b,
                                      const std::vector<GlobalState>& probe_states, const ObservationSpec& spec,
                                      const std::vector<int>& agents = {});

TrainResult train(const MergeEnvironment& env, const TrainerConfig& config, TrainingMode mode = TrainingMode::kPotential,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Same trainer with surrounding vehicles fixed to IDM and the ego's return as objective.
TrainResult train_single_agent(const MergeEnvironment& env, const TrainerConfig& config,
                               const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace mpgdrive
