#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "mpgdrive/errors.hpp"
#include "mpgdrive/training.hpp"

using namespace mpgdrive;

namespace {

MergeEnvironment small_env(int leaders, int followers, double horizon) {
  MergeEnvironment env;
  env.scenario.leaders = leaders;
  env.scenario.followers = followers;
  env.scenario.horizon = horizon;
  return env;
}

NetworkShape small_shape(const MergeEnvironment& env) { return {env.observation().size(), 6, 5}; }

// Only the output bias is set, so every observation maps to g * tanh(bias).
PolicyNetwork bias_only(const MergeEnvironment& env, double bias) {
  PolicyNetwork net(small_shape(env));
  net.params().setZero();
  net.params()[net.params().size() - 1] = bias;
  return net;
}

double objective_of(const MergeEnvironment& env, const PolicyNetwork& net, const GlobalState& s0, TrainingMode mode) {
  return mean_objective(env, net, {s0}, mode);
}

Eigen::VectorXd central_differences(const MergeEnvironment& env, const PolicyNetwork& net, const GlobalState& s0,
                                    TrainingMode mode, double h) {
  Eigen::VectorXd fd(net.params().size());
  for (Eigen::Index p = 0; p < fd.size(); ++p) {
    PolicyNetwork plus = net, minus = net;
    plus.params()[p] += h;
    minus.params()[p] -= h;
    fd[p] = (objective_of(env, plus, s0, mode) - objective_of(env, minus, s0, mode)) / (2 * h);
  }
  return fd;
}

TrainerConfig tiny_trainer() {
  TrainerConfig c;
  c.epochs = 8;
  c.batch_size = 3;
  c.frozen_batch_size = 3;
  c.probe_states = 5;
  c.hidden1 = 6;
  c.hidden2 = 5;
  c.seeds = {4, 9};
  return c;
}

}  // namespace

TEST(Sampling, AcceptedDrawsSatisfyHeadwayAndTtc) {
  const ScenarioConfig cfg;
  std::mt19937_64 rng(1);
  const std::vector<GlobalState> batch = sample_scenarios(cfg, 10000, rng);
  ASSERT_EQ(batch.size(), 10000u);
  for (const GlobalState& s : batch) {
    ASSERT_EQ(s.size(), 9);
    ASSERT_TRUE(satisfies_initial_constraints(s, cfg));
    EXPECT_EQ(s.lanes[0], Lane::kRamp);
    EXPECT_GE(s.vehicles[0].x, cfg.ego_x.lo);
    EXPECT_LE(s.vehicles[0].x, cfg.ego_x.hi);
    for (const VehicleState& v : s.vehicles) {
      EXPECT_GE(v.v, cfg.speed.lo);
      EXPECT_LE(v.v, cfg.speed.hi);
    }
  }
}

TEST(Sampling, ConstraintCheckMatchesDirectPairScan) {
  const ScenarioConfig cfg;
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const GlobalState s = sample_initial_states(cfg, rng);
    std::vector<int> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return s.vehicles[a].x < s.vehicles[b].x; });
    for (std::size_t k = 1; k < order.size(); ++k) {
      const VehicleState& rear = s.vehicles[order[k - 1]];
      const VehicleState& front = s.vehicles[order[k]];
      const double headway = front.x - rear.x;
      EXPECT_GE(headway, 7.0);
      if (rear.v > front.v) EXPECT_GE(headway / (rear.v - front.v), 4.0);
    }
  }
}

// Without neighbours nothing is rejected, so every stratum holds exactly one draw.
TEST(Sampling, LatinHypercubeOverPositionAndSpeed) {
  ScenarioConfig cfg;
  cfg.leaders = cfg.followers = 0;
  std::mt19937_64 rng(3);
  const int count = 40;
  const auto batch = sample_scenarios(cfg, count, rng);
  std::vector<int> x_cells(count, 0), v_cells(count, 0);
  for (const GlobalState& s : batch) {
    const double ux = (s.vehicles[0].x - cfg.ego_x.lo) / (cfg.ego_x.hi - cfg.ego_x.lo);
    const double uv = (s.vehicles[0].v - cfg.speed.lo) / (cfg.speed.hi - cfg.speed.lo);
    ++x_cells[std::min(count - 1, static_cast<int>(ux * count))];
    ++v_cells[std::min(count - 1, static_cast<int>(uv * count))];
  }
  for (int m = 0; m < count; ++m) {
    EXPECT_EQ(x_cells[m], 1) << "position stratum " << m;
    EXPECT_EQ(v_cells[m], 1) << "speed stratum " << m;
  }
}

TEST(Sampling, SingleVehicleAlwaysAccepted) {
  ScenarioConfig cfg;
  cfg.leaders = cfg.followers = 0;
  cfg.rejection_cap = 1;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const GlobalState s = sample_initial_states(cfg, rng);
    ASSERT_EQ(s.size(), 1);
    EXPECT_TRUE(satisfies_initial_constraints(s, cfg));
  }
}

TEST(Sampling, InfeasibleSpacingIsAConfigError) {
  ScenarioConfig cfg;
  cfg.slot_length = 5.0;
  cfg.rejection_cap = 200;
  std::mt19937_64 rng(5);
  EXPECT_THROW(sample_initial_states(cfg, rng), ConfigError);
}

TEST(Sampling, InvalidConfigsRejected) {
  ScenarioConfig cfg;
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_headway = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.speed = {20, 10};
  EXPECT_THROW(cfg.validate(), ConfigError);
  std::mt19937_64 rng(0);
  EXPECT_THROW(sample_scenarios(ScenarioConfig{}, 0, rng), ConfigError);
}

TEST(Sampling, DeterministicGivenRng) {
  const ScenarioConfig cfg;
  std::mt19937_64 a(77), b(77);
  EXPECT_EQ(sample_scenarios(cfg, 20, a), sample_scenarios(cfg, 20, b));
}

TEST(Rollout, ZeroPolicyFarApartRunsFullHorizon) {
  const MergeEnvironment env = small_env(1, 1, 2.0);
  const PolicyNetwork net = bias_only(env, 0.0);
  GlobalState s0{{{120, -3.7, 15, 0}, {400, 0, 15, 0}, {0, 0, 15, 0}}, {Lane::kRamp, Lane::kTarget, Lane::kTarget}};
  const Trajectory traj = rollout(env, shared_policy_controllers(net, 3), s0);
  EXPECT_EQ(traj.cause, Termination::kHorizon);
  EXPECT_EQ(traj.length(), 20);
  EXPECT_LE(traj.length(), env.scenario.horizon / env.scenario.dt + 1e-9);
  for (const StepRecord& r : traj.steps) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(r.accel[k], 0.0);
      EXPECT_EQ(r.policy_accel[k], 0.0);
    }
    ASSERT_EQ(r.rewards.size(), 3u);
    EXPECT_NEAR(r.potential, potential_function(r.state, r.accel, env.reward), 1e-12);
  }
}

TEST(Rollout, OverlappingStartHasLengthZero) {
  const MergeEnvironment env = small_env(1, 0, 2.0);
  const PolicyNetwork net = bias_only(env, 0.0);
  GlobalState s0{{{150, 0, 15, 0}, {152, 0, 15, 0}}, {Lane::kTarget, Lane::kTarget}};
  const Trajectory traj = rollout(env, shared_policy_controllers(net, 2), s0);
  EXPECT_EQ(traj.length(), 0);
  EXPECT_EQ(traj.cause, Termination::kCollision);
  ASSERT_TRUE(traj.collision.has_value());
  EXPECT_EQ(*traj.collision, std::make_pair(0, 1));
  EXPECT_EQ(traj.final_state, s0);
  EXPECT_EQ(total_potential(traj, 0.99), 0.0);
}

TEST(Rollout, CollisionEndsAtFirstOverlap) {
  MergeEnvironment env = small_env(1, 0, 5.0);
  env.feasibility = false;
  env.ramp_feasibility = false;
  const PolicyNetwork net = bias_only(env, 0.0);
  GlobalState s0{{{100, 0, 20, 0}, {120, 0, 10, 0}}, {Lane::kTarget, Lane::kTarget}};
  const Trajectory traj = rollout(env, shared_policy_controllers(net, 2), s0);
  const std::vector<VehicleGeometry> geoms(2, env.scenario.vehicle);
  EXPECT_EQ(traj.cause, Termination::kCollision);
  for (const StepRecord& r : traj.steps) EXPECT_FALSE(detect_collision(r.state.vehicles, geoms));
  EXPECT_TRUE(detect_collision(traj.final_state.vehicles, geoms));
}

TEST(Rollout, Deterministic) {
  const MergeEnvironment env = small_env(2, 2, 3.0);
  PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 3);
  net.params() *= 4.0;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const GlobalState s0 = sample_initial_states(env.scenario, rng);
    const Trajectory a = rollout(env, shared_policy_controllers(net, 5), s0);
    const Trajectory b = rollout(env, shared_policy_controllers(net, 5), s0);
    ASSERT_EQ(a.length(), b.length());
    for (int t = 0; t < a.length(); ++t) {
      EXPECT_EQ(a.steps[t].state, b.steps[t].state);
      EXPECT_EQ(a.steps[t].accel, b.steps[t].accel);
      EXPECT_EQ(a.steps[t].potential, b.steps[t].potential);
    }
    EXPECT_EQ(a.final_state, b.final_state);
  }
}

TEST(Rollout, RespectsSpeedAndActionBounds) {
  const MergeEnvironment env = small_env(2, 2, 6.0);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 50 + trial);
    net.params() *= 10.0;
    const Trajectory traj = rollout(env, shared_policy_controllers(net, 5), sample_initial_states(env.scenario, rng));
    for (const StepRecord& r : traj.steps) {
      for (int k = 0; k < 5; ++k) {
        EXPECT_GE(r.state.vehicles[k].v, 0.0);
        EXPECT_LE(r.state.vehicles[k].v, kMaxSpeed);
        EXPECT_LE(std::abs(r.accel[k]), kGravity);
        EXPECT_LE(std::abs(r.policy_accel[k]), kGravity);
      }
    }
  }
}

TEST(Rollout, MismatchedControllersRejected) {
  const MergeEnvironment env = small_env(1, 0, 1.0);
  const PolicyNetwork net = bias_only(env, 0.0);
  GlobalState s0{{{120, -3.7, 15, 0}, {200, 0, 15, 0}}, {Lane::kRamp, Lane::kTarget}};
  EXPECT_THROW(rollout(env, shared_policy_controllers(net, 1), s0), StructureError);
  const PolicyNetwork wrong(NetworkShape{5, 3, 3});
  EXPECT_THROW(rollout(env, shared_policy_controllers(wrong, 2), s0), StructureError);
}

TEST(TotalPotential, GammaZeroIsFirstTerm) {
  Trajectory traj;
  for (double phi : {-3.0, -7.0, -11.0}) {
    StepRecord r;
    r.potential = phi;
    traj.steps.push_back(r);
  }
  EXPECT_EQ(total_potential(traj, 0.0), -3.0);
  EXPECT_EQ(total_potential(Trajectory{}, 0.5), 0.0);
}

TEST(TotalPotential, ConstantGivesGeometricSum) {
  Trajectory traj;
  const int length = 37;
  const double c = -2.5, gamma = 0.99;
  for (int t = 0; t < length; ++t) {
    StepRecord r;
    r.potential = c;
    traj.steps.push_back(r);
  }
  EXPECT_NEAR(total_potential(traj, gamma), c * (1 - std::pow(gamma, length)) / (1 - gamma), 1e-12);
}

TEST(TotalPotential, MatchesResummationOfRollout) {
  const MergeEnvironment env = small_env(2, 2, 4.0);
  PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 8);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Trajectory traj = rollout(env, shared_policy_controllers(net, 5), sample_initial_states(env.scenario, rng));
    double expect = 0.0, agent = 0.0;
    for (int t = traj.length() - 1; t >= 0; --t) {
      expect = potential_function(traj.steps[t].state, traj.steps[t].accel, env.reward) + env.scenario.gamma * expect;
      agent = traj.steps[t].rewards[2] + env.scenario.gamma * agent;
    }
    EXPECT_NEAR(total_potential(traj, env.scenario.gamma), expect, 1e-9 * std::abs(expect));
    EXPECT_NEAR(total_agent_reward(traj, 2, env.scenario.gamma), agent, 1e-9 * std::abs(agent));
  }
}

TEST(TotalPotential, BoundedByPenaltyFloor) {
  const MergeEnvironment env = small_env(2, 2, 4.0);
  const MergeRewardSpec& w = env.reward;
  const int n = env.scenario.n_agents();
  const double pairs = n * (n - 1) / 2.0;
  const double w_max = std::max({w.w_speed, w.w_comfort, w.w_ttc, w.w_conflict});
  // Self terms are bounded by the speed and action ranges.
  const double self_floor = n * (w.w_speed * 30.0 * 30.0 + w.w_comfort * kGravity * kGravity);
  const double floor = -(pairs * w_max / w.eps + self_floor) / (1 - env.scenario.gamma);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 200 + trial);
    net.params() *= 5.0;
    const double j = total_potential(
        rollout(env, shared_policy_controllers(net, n), sample_initial_states(env.scenario, rng)), env.scenario.gamma);
    EXPECT_LE(j, 0.0);
    EXPECT_GE(j, floor);
  }
}

TEST(PotentialGradient, ZeroWeightsGiveZeroGradient) {
  MergeEnvironment env = small_env(2, 2, 2.0);
  env.reward.w_speed = env.reward.w_comfort = env.reward.w_ttc = env.reward.w_conflict = 0;
  const PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 10);
  std::mt19937_64 rng(10);
  const auto batch = sample_scenarios(env.scenario, 3, rng);
  const BatchGradient g = potential_gradient(env, net, batch);
  EXPECT_EQ(g.mean_objective, 0.0);
  EXPECT_EQ(g.grad.norm(), 0.0);
}

TEST(PotentialGradient, SingleStepSingleAgentChainRule) {
  MergeEnvironment env = small_env(0, 0, 0.1);
  PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 11);
  net.params() *= 2.0;
  GlobalState s0{{{120, -3.7, 12, 0}}, {Lane::kRamp}};
  const BatchGradient g = potential_gradient(env, net, {s0});

  const ObservationResult obs = build_observation(s0, 0, env.observation());
  Eigen::MatrixXd col = obs.features;
  ForwardCache cache;
  const double u = net.forward(col, &cache)(0);
  ASSERT_LT(std::abs(u), kGravity);
  Eigen::VectorXd du(net.params().size());
  du.setZero();
  net.backward(cache, Eigen::RowVectorXd::Ones(1), du);
  // Only the comfort term sees the action in a one-step, one-vehicle episode.
  const Eigen::VectorXd expect = -2.0 * env.reward.w_comfort * u * du;
  EXPECT_NEAR(g.mean_objective,
              env.reward.w_speed * speed_tracking_reward(12, env.reward.desired_speed) +
                  env.reward.w_comfort * comfort_reward(u),
              1e-12);
  EXPECT_LT((g.grad - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
}

TEST(PotentialGradient, TwoAgentsThreeStepsMatchFiniteDifferences) {
  const MergeEnvironment env = small_env(1, 0, 0.3);
  std::mt19937_64 rng(12);
  for (int point = 0; point < 10; ++point) {
    PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 300 + point);
    net.params() *= 3.0;
    const GlobalState s0 = sample_initial_states(env.scenario, rng);
    const BatchGradient g = potential_gradient(env, net, {s0});
    const Eigen::VectorXd fd = central_differences(env, net, s0, TrainingMode::kPotential, 1e-6);
    EXPECT_LT((g.grad - fd).norm(), 1e-4 * fd.norm()) << "point " << point;
  }
}

TEST(PotentialGradient, TwoTargetLaneAgentsUnderActiveFeasibility) {
  const MergeEnvironment env = small_env(1, 0, 0.3);
  int active = 0;
  for (int point = 0; point < 10; ++point) {
    PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 400 + point);
    net.params() *= 3.0;
    net.params()[net.params().size() - 1] += 1.5;
    // The rear vehicle wants to accelerate into a slower leader, so its upper bound binds.
    GlobalState s0{{{150, 0, 11 + 0.2 * point, 0}, {166, 0, 10, 0}}, {Lane::kTarget, Lane::kTarget}};
    const Trajectory traj = rollout(env, shared_policy_controllers(net, 2), s0);
    bool bound = false;
    for (const StepRecord& r : traj.steps) bound = bound || r.accel[0] < r.policy_accel[0];
    active += bound;
    const BatchGradient g = potential_gradient(env, net, {s0});
    const Eigen::VectorXd fd = central_differences(env, net, s0, TrainingMode::kPotential, 1e-6);
    EXPECT_GT(fd.norm(), 0.0);
    EXPECT_LT((g.grad - fd).norm(), 1e-4 * fd.norm()) << "point " << point;
  }
  EXPECT_GE(active, 3);
}

TEST(PotentialGradient, BatchIsMeanOfScenarios) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  const PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 13);
  std::mt19937_64 rng(13);
  const auto batch = sample_scenarios(env.scenario, 4, rng);
  const BatchGradient all = potential_gradient(env, net, batch);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(net.params().size());
  double obj = 0.0;
  for (const GlobalState& s : batch) {
    const BatchGradient one = potential_gradient(env, net, {s});
    sum += one.grad;
    obj += one.mean_objective;
  }
  EXPECT_LT((all.grad - sum / 4).norm(), 1e-12 * std::max(1.0, all.grad.norm()));
  EXPECT_NEAR(all.mean_objective, obj / 4, 1e-9 * std::abs(obj));
  EXPECT_NEAR(all.mean_objective, mean_objective(env, net, batch), 1e-9 * std::abs(obj));
}

TEST(PotentialGradient, WorkersDoNotChangeTheResult) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  const PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 14);
  std::mt19937_64 rng(14);
  const auto batch = sample_scenarios(env.scenario, 7, rng);
  const BatchGradient one = potential_gradient(env, net, batch, TrainingMode::kPotential, 1, 10.0);
  const BatchGradient four = potential_gradient(env, net, batch, TrainingMode::kPotential, 4, 10.0);
  EXPECT_EQ(one.grad, four.grad);
  EXPECT_EQ(one.mean_objective, four.mean_objective);
}

TEST(PotentialGradient, ScenarioClipBoundsEachContribution) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  const PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 15);
  std::mt19937_64 rng(15);
  const auto batch = sample_scenarios(env.scenario, 5, rng);
  const BatchGradient g = potential_gradient(env, net, batch, TrainingMode::kPotential, 1, 0.5);
  EXPECT_LE(g.grad.norm(), 0.5 + 1e-12);
}

TEST(PotentialGradient, EmptyBatchAndNonFiniteGradientReported) {
  const MergeEnvironment env = small_env(1, 0, 0.3);
  PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 16);
  EXPECT_THROW(potential_gradient(env, net, {}), ConfigError);
  net.params().setConstant(std::numeric_limits<double>::quiet_NaN());
  std::mt19937_64 rng(16);
  const auto batch = sample_scenarios(env.scenario, 2, rng);
  try {
    potential_gradient(env, net, batch);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("scenario 0"), std::string::npos);
  }
}

TEST(ActionDifference, IdenticalParamsGiveZero) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  const PolicyNetwork net = PolicyNetwork::initialize(small_shape(env), 17);
  std::mt19937_64 rng(17);
  const auto probes = sample_scenarios(env.scenario, 10, rng);
  EXPECT_EQ(mean_squared_action_difference(net, net, probes, env.observation()), 0.0);
}

TEST(ActionDifference, SymmetricUnderSwap) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  const PolicyNetwork a = PolicyNetwork::initialize(small_shape(env), 18);
  const PolicyNetwork b = PolicyNetwork::initialize(small_shape(env), 19);
  std::mt19937_64 rng(18);
  const auto probes = sample_scenarios(env.scenario, 10, rng);
  const double ab = mean_squared_action_difference(a, b, probes, env.observation());
  EXPECT_GT(ab, 0.0);
  EXPECT_EQ(ab, mean_squared_action_difference(b, a, probes, env.observation()));
}

TEST(ActionDifference, HandEvaluatedConstantPolicies) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  const PolicyNetwork a = bias_only(env, 0.1), b = bias_only(env, -0.2);
  std::mt19937_64 rng(19);
  const auto probes = sample_scenarios(env.scenario, 1, rng);
  const double expect = std::pow(kGravity * (std::tanh(0.1) - std::tanh(-0.2)), 2);
  EXPECT_NEAR(mean_squared_action_difference(a, b, probes, env.observation()), expect, 1e-12);
  EXPECT_NEAR(mean_squared_action_difference(a, b, probes, env.observation(), {0}), expect, 1e-12);
  EXPECT_THROW(mean_squared_action_difference(a, b, {}, env.observation()), ConfigError);
}

TEST(Trainer, ZeroStepSizeKeepsParametersAndFlatLog) {
  const MergeEnvironment env = small_env(2, 2, 1.0);
  TrainerConfig cfg = tiny_trainer();
  cfg.learning_rate = 0.0;
  const TrainResult r = train(env, cfg);
  ASSERT_EQ(r.logs.size(), cfg.epochs * cfg.seeds.size());
  for (const EpochLog& log : r.logs) {
    const EpochLog& first = r.logs[log.seed == cfg.seeds[0] ? 0 : cfg.epochs];
    EXPECT_EQ(log.frozen_objective, first.frozen_objective);
    EXPECT_EQ(log.action_difference, 0.0);
  }
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    const NetworkShape shape{env.observation().size(), cfg.hidden1, cfg.hidden2, cfg.negative_slope, kGravity};
    EXPECT_EQ(r.bundle.members[s].shape(), shape);
    EXPECT_EQ(r.bundle.seeds[s], cfg.seeds[s]);
  }
}

TEST(Trainer, LogsAreBitIdenticalAcrossRuns) {
  const MergeEnvironment env = small_env(2, 2, 1.5);
  TrainerConfig cfg = tiny_trainer();
  cfg.workers = 3;
  const TrainResult a = train(env, cfg);
  const TrainResult b = train(env, cfg);
  ASSERT_EQ(a.logs.size(), b.logs.size());
  for (std::size_t e = 0; e < a.logs.size(); ++e) {
    EXPECT_EQ(a.logs[e].mean_objective, b.logs[e].mean_objective);
    EXPECT_EQ(a.logs[e].frozen_objective, b.logs[e].frozen_objective);
    EXPECT_EQ(a.logs[e].action_difference, b.logs[e].action_difference);
    EXPECT_EQ(a.logs[e].grad_norm, b.logs[e].grad_norm);
    EXPECT_FALSE(a.logs[e].wall_time.has_value());
  }
  for (std::size_t s = 0; s < a.bundle.members.size(); ++s) {
    EXPECT_EQ(a.bundle.members[s].params(), b.bundle.members[s].params());
  }
}

// Per-scenario clipping reweights scenarios, so only the unclipped batch
// gradient is an ascent direction for the batch mean.
TEST(Trainer, FrozenBatchPotentialIsNonDecreasing) {
  const MergeEnvironment env = small_env(2, 2, 3.0);
  TrainerConfig cfg = tiny_trainer();
  cfg.fresh_batch = false;
  cfg.scenario_clip = 0;
  cfg.frozen_batch_size = 4;
  cfg.epochs = 25;
  cfg.learning_rate = 5e-5;
  cfg.lr_decay_epochs = 0;
  const TrainResult r = train(env, cfg);
  for (std::size_t e = 1; e < r.logs.size(); ++e) {
    if (r.logs[e].seed != r.logs[e - 1].seed) continue;
    EXPECT_GE(r.logs[e].frozen_objective,
              r.logs[e - 1].frozen_objective - 1e-9 * std::abs(r.logs[e - 1].frozen_objective))
        << "seed " << r.logs[e].seed << " epoch " << r.logs[e].epoch;
  }
  EXPECT_GT(r.logs[cfg.epochs - 1].frozen_objective, r.logs[0].frozen_objective);
}

TEST(Trainer, DecayingStepsShrinkActionDifference) {
  const MergeEnvironment env = small_env(2, 2, 2.0);
  TrainerConfig cfg = tiny_trainer();
  cfg.epochs = 120;
  cfg.seeds = {1};
  const TrainResult r = train(env, cfg);
  double head = 0.0, tail = 0.0;
  for (int e = 0; e < 10; ++e) head += r.logs[e].action_difference;
  for (int e = cfg.epochs - 10; e < cfg.epochs; ++e) tail += r.logs[e].action_difference;
  EXPECT_LT(tail, 0.1 * head);
  for (int e = 0; e < cfg.epochs; ++e) {
    EXPECT_DOUBLE_EQ(r.logs[e].step_size, cfg.learning_rate / (1.0 + e / cfg.lr_decay_epochs));
  }
}

TEST(Trainer, SpeedTrackingOnlyLearnsDesiredSpeed) {
  MergeEnvironment env = small_env(0, 0, 8.0);
  env.reward.w_comfort = env.reward.w_ttc = env.reward.w_conflict = 0;
  TrainerConfig cfg = tiny_trainer();
  cfg.hidden1 = cfg.hidden2 = 16;
  cfg.epochs = 1500;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.02;
  cfg.lr_decay_epochs = 400;
  cfg.scenario_clip = 0;
  cfg.seeds = {3};
  const TrainResult r = train(env, cfg);
  std::mt19937_64 rng(20);
  const auto test_states = sample_scenarios(env.scenario, 20, rng);
  for (const GlobalState& s0 : test_states) {
    const Trajectory traj = rollout(env, shared_policy_controllers(r.bundle.members[0], 1), s0);
    EXPECT_NEAR(traj.final_state.vehicles[0].v, env.reward.desired_speed, 0.5) << "start speed " << s0.vehicles[0].v;
  }
}

TEST(Trainer, ConfigValidation) {
  const MergeEnvironment env = small_env(0, 0, 1.0);
  TrainerConfig cfg = tiny_trainer();
  cfg.seeds.clear();
  EXPECT_THROW(train(env, cfg), ConfigError);
  cfg = tiny_trainer();
  cfg.batch_size = 0;
  EXPECT_THROW(train(env, cfg), ConfigError);
  cfg = tiny_trainer();
  cfg.learning_rate = -1;
  EXPECT_THROW(train(env, cfg), ConfigError);
  cfg = tiny_trainer();
  cfg.workers = 0;
  EXPECT_THROW(train(env, cfg), ConfigError);
}

TEST(Trainer, EpochCallbackSeesEveryLog) {
  const MergeEnvironment env = small_env(1, 1, 1.0);
  TrainerConfig cfg = tiny_trainer();
  cfg.record_wall_time = true;
  std::vector<EpochLog> seen;
  const TrainResult r = train(env, cfg, TrainingMode::kPotential, [&](const EpochLog& l) { seen.push_back(l); });
  ASSERT_EQ(seen.size(), r.logs.size());
  for (std::size_t e = 0; e < seen.size(); ++e) {
    EXPECT_EQ(seen[e].epoch, r.logs[e].epoch);
    ASSERT_TRUE(seen[e].wall_time.has_value());
    EXPECT_GE(*seen[e].wall_time, 0.0);
  }
}
