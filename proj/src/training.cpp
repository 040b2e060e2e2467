#include "mpgdrive/training.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

void TrainerConfig::validate() const {
  if (epochs < 0) throw ConfigError("trainer: epochs must be non-negative");
  if (batch_size < 1 || frozen_batch_size < 1 || probe_states < 1) throw ConfigError("trainer: batch sizes must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("trainer: learning rate must be non-negative");
  if (!(lr_decay_epochs >= 0.0)) throw ConfigError("trainer: lr_decay_epochs must be non-negative");
  if (!(grad_clip > 0.0)) throw ConfigError("trainer: grad_clip must be positive");
  if (!(scenario_clip >= 0.0)) throw ConfigError("trainer: scenario_clip must be non-negative");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("trainer: hidden sizes must be positive");
  if (workers < 1) throw ConfigError("trainer: workers must be positive");
  if (seeds.empty()) throw ConfigError("trainer: at least one seed required");
}

std::vector<Controller> training_controllers(const PolicyNetwork& net, int n_agents, TrainingMode mode) {
  std::vector<Controller> c = shared_policy_controllers(net, n_agents);
  if (mode == TrainingMode::kSingleAgent) {
    for (int k = 1; k < n_agents; ++k) c[k] = Controller::idm();
  }
  return c;
}

namespace {

Objective objective_for(TrainingMode mode) {
  return mode == TrainingMode::kPotential ? Objective::potential() : Objective::agent_reward(0);
}

double objective_value(const Trajectory& t, TrainingMode mode, double gamma) {
  return mode == TrainingMode::kPotential ? total_potential(t, gamma) : total_agent_reward(t, 0, gamma);
}

template <class F>
void parallel_for(int count, int workers, F&& body) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int m = 0; m < count; ++m) body(m);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int m = w; m < count; m += workers) body(m);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

BatchGradient potential_gradient(const MergeEnvironment& env, const PolicyNetwork& net,
                                 const std::vector<GlobalState>& batch, TrainingMode mode, int workers,
                                 double scenario_clip) {
  if (batch.empty()) throw ConfigError("potential_gradient: empty batch");
  const int count = static_cast<int>(batch.size());
  std::vector<RolloutGradient> parts(count);
  std::vector<std::string> errors(count);
  parallel_for(count, workers, [&](int m) {
    try {
      parts[m] = rollout_gradient(env, training_controllers(net, batch[m].size(), mode), batch[m], net,
                                  objective_for(mode));
    } catch (const NumericalError& e) {
      errors[m] = e.what();
    }
  });
  BatchGradient out;
  out.grad.setZero(net.params().size());
  for (int m = 0; m < count; ++m) {
    if (!errors[m].empty()) throw NumericalError(errors[m] + " (scenario " + std::to_string(m) + ")");
    const double norm = parts[m].grad.norm();
    if (scenario_clip > 0.0 && norm > scenario_clip) {
      out.grad += (scenario_clip / norm) * parts[m].grad;
    } else {
      out.grad += parts[m].grad;
    }
    out.mean_objective += parts[m].objective;
    if (parts[m].trajectory.cause == Termination::kCollision) ++out.collisions;
  }
  out.grad /= count;
  out.mean_objective /= count;
  return out;
}

double mean_objective(const MergeEnvironment& env, const PolicyNetwork& net, const std::vector<GlobalState>& batch,
                      TrainingMode mode) {
  if (batch.empty()) return 0.0;
  double sum = 0.0;
  for (const GlobalState& s0 : batch) {
    sum += objective_value(rollout(env, training_controllers(net, s0.size(), mode), s0), mode, env.scenario.gamma);
  }
  return sum / static_cast<double>(batch.size());
}

double mean_squared_action_difference(const PolicyNetwork& a, const PolicyNetwork& b,
                                      const std::vector<GlobalState>& probe_states, const ObservationSpec& spec,
                                      const std::vector<int>& agents) {
  if (probe_states.empty()) throw ConfigError("mean_squared_action_difference: empty probe set");
  double sum = 0.0;
  long count = 0;
  for (const GlobalState& s : probe_states) {
    std::vector<int> who = agents;
    if (who.empty()) {
      for (int k = 0; k < s.size(); ++k) who.push_back(k);
    }
    Eigen::MatrixXd obs(spec.size(), static_cast<Eigen::Index>(who.size()));
    for (std::size_t c = 0; c < who.size(); ++c) {
      obs.col(static_cast<Eigen::Index>(c)) = build_observation(s, who[c], spec).features;
    }
    sum += (a.forward(obs) - b.forward(obs)).squaredNorm();
    count += static_cast<long>(who.size());
  }
  return sum / static_cast<double>(count);
}

TrainResult train(const MergeEnvironment& env, const TrainerConfig& config, TrainingMode mode,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  env.validate();
  config.validate();
  const ObservationSpec ospec = env.observation();
  NetworkShape shape{ospec.size(), config.hidden1, config.hidden2, config.negative_slope, kGravity};
  std::vector<int> probe_agents;
  if (mode == TrainingMode::kSingleAgent) probe_agents = {0};

  TrainResult result;
  result.bundle.observation = ospec;
  for (std::uint64_t seed : config.seeds) {
    const auto stream = [seed](std::uint64_t tag) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(tag)};
      return std::mt19937_64(seq);
    };
    auto init_rng = stream(1);
    auto batch_rng = stream(2);
    auto frozen_rng = stream(3);
    auto probe_rng = stream(4);

    PolicyNetwork net = PolicyNetwork::initialize(shape, init_rng());
    const std::vector<GlobalState> frozen = sample_scenarios(env.scenario, config.frozen_batch_size, frozen_rng);
    const std::vector<GlobalState> probes = sample_scenarios(env.scenario, config.probe_states, probe_rng);
    const auto start = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      EpochLog log;
      log.seed = seed;
      log.epoch = epoch;
      const std::vector<GlobalState> batch =
          config.fresh_batch ? sample_scenarios(env.scenario, config.batch_size, batch_rng) : frozen;
      const BatchGradient bg = potential_gradient(env, net, batch, mode, config.workers, config.scenario_clip);
      log.mean_objective = bg.mean_objective;
      log.collisions = bg.collisions;
      log.frozen_objective = config.fresh_batch ? mean_objective(env, net, frozen, mode) : bg.mean_objective;
      if (!std::isfinite(log.mean_objective) || !std::isfinite(log.frozen_objective)) {
        std::ostringstream msg;
        msg << "training diverged: seed " << seed << " epoch " << epoch << " objective " << log.mean_objective
            << " frozen " << log.frozen_objective << " gradient norm " << bg.grad.norm();
        throw NumericalError(msg.str());
      }
      log.grad_norm = bg.grad.norm();
      log.step_size = config.lr_decay_epochs > 0.0
                          ? config.learning_rate / (1.0 + epoch / config.lr_decay_epochs)
                          : config.learning_rate;
      const double scale = log.grad_norm > config.grad_clip ? config.grad_clip / log.grad_norm : 1.0;
      PolicyNetwork next = net;
      next.params() += log.step_size * scale * bg.grad;
      log.action_difference = mean_squared_action_difference(net, next, probes, ospec, probe_agents);
      net = std::move(next);
      if (config.record_wall_time) {
        log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      if (on_epoch) on_epoch(log);
      result.logs.push_back(log);
    }
    result.bundle.seeds.push_back(seed);
    result.bundle.members.push_back(std::move(net));
  }
  return result;
}

TrainResult train_single_agent(const MergeEnvironment& env, const TrainerConfig& config,
                               const std::function<void(const EpochLog&)>& on_epoch) {
  return train(env, config, TrainingMode::kSingleAgent, on_epoch);
}

}  // namespace mpgdrive
