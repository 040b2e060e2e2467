#include "mpgdrive/rollout.hpp"

#include <cmath>
#include <limits>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

ObservationSpec MergeEnvironment::observation() const {
  ObservationSpec o;
  o.n_agents = scenario.n_agents();
  o.conflict_x = scenario.road.conflict_x;
  return o;
}

void MergeEnvironment::validate() const {
  scenario.validate();
  reward.validate();
  idm.validate();
  if (reward.conflict_x != scenario.road.conflict_x) {
    throw ConfigError("environment: reward conflict point differs from the road's");
  }
}

namespace {

struct NetGroup {
  const PolicyNetwork* net = nullptr;
  std::vector<int> vehicles;
  ForwardCache cache;
  std::vector<ObservationResult> obs;
};

struct VehicleTape {
  ProjectedAction proj;
  FeasibleBounds bounds;
  int leader = -1;  // feasibility or IDM leader
  int follower = -1;
  IdmPartials idm;
  bool speed_inside = true;
  double dx_dv = 0.0;
};

struct StepTape {
  std::vector<NetGroup> groups;
  std::vector<VehicleTape> vehicles;
};

std::vector<NetGroup> group_networks(const std::vector<Controller>& controllers) {
  std::vector<NetGroup> groups;
  for (int k = 0; k < static_cast<int>(controllers.size()); ++k) {
    const Controller& c = controllers[k];
    if (c.kind != ControllerKind::kNetwork) continue;
    if (!c.network) throw StructureError("rollout: network controller without a network");
    auto it = std::find_if(groups.begin(), groups.end(), [&](const NetGroup& g) { return g.net == c.network; });
    if (it == groups.end()) {
      groups.push_back({c.network, {}, {}, {}});
      it = groups.end() - 1;
    }
    it->vehicles.push_back(k);
  }
  return groups;
}

const VehicleState& replay_at(const std::vector<VehicleState>& r, int t) {
  return r[std::min<std::size_t>(static_cast<std::size_t>(t), r.size() - 1)];
}

Trajectory simulate(const MergeEnvironment& env, const std::vector<Controller>& controllers, const GlobalState& s0,
                    std::vector<StepTape>* tape) {
  const int n = s0.size();
  if (static_cast<int>(controllers.size()) != n) throw StructureError("rollout: one controller per vehicle required");
  if (static_cast<int>(s0.lanes.size()) != n) throw StructureError("rollout: one lane per vehicle required");
  for (const Controller& c : controllers) {
    if (c.kind == ControllerKind::kReplay && (!c.replay || c.replay->empty())) {
      throw StructureError("rollout: replay controller without a recording");
    }
    if (c.kind == ControllerKind::kNetwork &&
        (!c.network || c.network->shape().inputs != env.observation().size())) {
      throw StructureError("rollout: network input size does not match the observation");
    }
  }
  const ScenarioConfig& sc = env.scenario;
  const ObservationSpec ospec = env.observation();
  const std::vector<VehicleGeometry> geoms(n, sc.vehicle);
  const int steps = sc.steps();
  const double dt = sc.dt;

  Trajectory traj;
  GlobalState s = s0;
  std::vector<NetGroup> groups = group_networks(controllers);
  for (int t = 0; t < steps; ++t) {
    if (auto hit = detect_collision(s.vehicles, geoms)) {
      traj.cause = Termination::kCollision;
      traj.collision = hit;
      break;
    }
    StepRecord rec;
    rec.state = s;
    rec.accel.assign(n, 0.0);
    rec.policy_accel.assign(n, 0.0);
    StepTape st;
    st.vehicles.resize(n);

    for (NetGroup& g : groups) {
      Eigen::MatrixXd obs(ospec.size(), static_cast<Eigen::Index>(g.vehicles.size()));
      g.obs.clear();
      for (std::size_t c = 0; c < g.vehicles.size(); ++c) {
        g.obs.push_back(build_observation(s, g.vehicles[c], ospec));
        obs.col(static_cast<Eigen::Index>(c)) = g.obs.back().features;
      }
      const Eigen::RowVectorXd u = g.net->forward(obs, tape ? &g.cache : nullptr);
      for (std::size_t c = 0; c < g.vehicles.size(); ++c) rec.policy_accel[g.vehicles[c]] = u(static_cast<Eigen::Index>(c));
    }

    for (int k = 0; k < n; ++k) {
      VehicleTape& vt = st.vehicles[k];
      const VehicleState& me = s.vehicles[k];
      switch (controllers[k].kind) {
        case ControllerKind::kNetwork: {
          const double raw = rec.policy_accel[k];
          vt.proj.value = raw;
          const bool ramp = s.lanes[k] == Lane::kRamp;
          if (env.feasibility && (!ramp || env.ramp_feasibility)) {
            const NeighborPair nb = find_neighbors(s, k, ramp ? NeighborScope::kCorridor : NeighborScope::kSameLane);
            std::optional<VehicleState> lead, follow;
            if (nb.leader) lead = s.vehicles[*nb.leader];
            if (nb.follower) follow = s.vehicles[*nb.follower];
            vt.leader = nb.leader.value_or(-1);
            vt.follower = nb.follower.value_or(-1);
            vt.bounds = feasible_action_bounds(me, lead, follow, dt, env.reward.tau_s, sc.vehicle);
            vt.proj = project_to_feasible(raw, vt.bounds.interval);
          }
          rec.accel[k] = vt.proj.value;
          break;
        }
        case ControllerKind::kIdm: {
          const NeighborPair nb = find_neighbors(s, k, NeighborScope::kSameLane);
          double gap = std::numeric_limits<double>::infinity();
          double closing = 0.0;
          if (nb.leader) {
            const VehicleState& l = s.vehicles[*nb.leader];
            gap = l.x - me.x - sc.vehicle.body_length;
            closing = me.v - l.v;
            vt.leader = *nb.leader;
          }
          vt.idm = idm_acceleration_partials(gap, me.v, closing, env.idm);
          rec.accel[k] = rec.policy_accel[k] = vt.idm.value;
          break;
        }
        case ControllerKind::kConstant:
          break;
        case ControllerKind::kReplay: {
          const double v_next = replay_at(*controllers[k].replay, t + 1).v;
          rec.accel[k] = rec.policy_accel[k] = (v_next - me.v) / dt;
          break;
        }
      }
    }

    rec.rewards.resize(n);
    for (int k = 0; k < n; ++k) rec.rewards[k] = agent_reward(s, rec.accel, k, env.reward);
    rec.potential = potential_function(s, rec.accel, env.reward);

    GlobalState next = s;
    for (int k = 0; k < n; ++k) {
      if (controllers[k].kind == ControllerKind::kReplay) {
        const auto& r = *controllers[k].replay;
        if (static_cast<std::size_t>(t + 1) < r.size()) {
          next.vehicles[k] = r[t + 1];
        } else {
          next.vehicles[k].x += s.vehicles[k].v * dt;
        }
        st.vehicles[k].speed_inside = false;
        continue;
      }
      const VehicleAction a{rec.accel[k], 0.0};
      const StepResult r = step_vehicle(s.vehicles[k], a, dt, sc.vehicle);
      next.vehicles[k] = r.state;
      st.vehicles[k].speed_inside = !r.speed_clamped;
      st.vehicles[k].dx_dv = std::cos(s.vehicles[k].phi) * dt;
    }
    apply_merge(next, sc.road);

    traj.steps.push_back(std::move(rec));
    if (tape) {
      st.groups = groups;
      tape->push_back(std::move(st));
    }
    s = std::move(next);
  }
  if (traj.cause == Termination::kHorizon) {
    if (auto hit = detect_collision(s.vehicles, geoms)) {
      traj.cause = Termination::kCollision;
      traj.collision = hit;
    }
  }
  traj.final_state = std::move(s);
  return traj;
}

void add_bound(const BoundSensitivity& b, int ego, int leader, int follower, double g, std::vector<double>& gx,
               std::vector<double>& gv) {
  gx[ego] += g * b.ego_x;
  gv[ego] += g * b.ego_v;
  if (leader >= 0) {
    gx[leader] += g * b.leader_x;
    gv[leader] += g * b.leader_v;
  }
  if (follower >= 0) {
    gx[follower] += g * b.follower_x;
    gv[follower] += g * b.follower_v;
  }
}

}  // namespace

Trajectory rollout(const MergeEnvironment& env, const std::vector<Controller>& controllers, const GlobalState& s0) {
  return simulate(env, controllers, s0, nullptr);
}

std::vector<Controller> shared_policy_controllers(const PolicyNetwork& net, int n_agents) {
  return std::vector<Controller>(n_agents, Controller::net(net));
}

double total_potential(const Trajectory& traj, double gamma) {
  double sum = 0.0, w = 1.0;
  for (const StepRecord& r : traj.steps) {
    sum += w * r.potential;
    w *= gamma;
  }
  return sum;
}

double total_agent_reward(const Trajectory& traj, int agent, double gamma) {
  double sum = 0.0, w = 1.0;
  for (const StepRecord& r : traj.steps) {
    sum += w * r.rewards.at(agent);
    w *= gamma;
  }
  return sum;
}

RolloutGradient rollout_gradient(const MergeEnvironment& env, const std::vector<Controller>& controllers,
                                 const GlobalState& s0, const PolicyNetwork& trainable, const Objective& objective) {
  std::vector<StepTape> tape;
  RolloutGradient out;
  out.trajectory = simulate(env, controllers, s0, &tape);
  const Trajectory& traj = out.trajectory;
  const double gamma = env.scenario.gamma;
  const int n = s0.size();
  if (objective.kind == Objective::Kind::kAgentReward && (objective.agent < 0 || objective.agent >= n)) {
    throw StructureError("rollout_gradient: objective agent out of range");
  }
  out.objective = objective.kind == Objective::Kind::kPotential ? total_potential(traj, gamma)
                                                                : total_agent_reward(traj, objective.agent, gamma);
  out.grad.setZero(trainable.params().size());

  const int len = traj.length();
  std::vector<double> lx(n, 0.0), lv(n, 0.0);  // adjoint of the state at t + 1
  std::vector<double> gx(n), gv(n), gu(n);
  for (int t = len - 1; t >= 0; --t) {
    const StepRecord& rec = traj.steps[t];
    const StepTape& st = tape[t];
    const double weight = std::pow(gamma, t);
    for (int k = 0; k < n; ++k) {
      const VehicleTape& vt = st.vehicles[k];
      if (controllers[k].kind == ControllerKind::kReplay) {
        gx[k] = gv[k] = gu[k] = 0.0;
        continue;
      }
      const double pass = vt.speed_inside ? 1.0 : 0.0;
      gx[k] = lx[k];
      gv[k] = lx[k] * vt.dx_dv + lv[k] * pass;
      gu[k] = lv[k] * pass * env.scenario.dt;
    }

    RewardGradient rg(n);
    if (objective.kind == Objective::Kind::kPotential) {
      potential_gradient(rec.state, rec.accel, env.reward, weight, rg);
    } else {
      agent_reward_gradient(rec.state, rec.accel, objective.agent, env.reward, weight, rg);
    }
    for (int k = 0; k < n; ++k) {
      gx[k] += rg.dx[k];
      gv[k] += rg.dv[k];
      gu[k] += rg.du[k];
    }

    for (int k = 0; k < n; ++k) {
      const VehicleTape& vt = st.vehicles[k];
      switch (controllers[k].kind) {
        case ControllerKind::kIdm:
          if (vt.leader >= 0) {
            gx[k] -= gu[k] * vt.idm.d_gap;
            gx[vt.leader] += gu[k] * vt.idm.d_gap;
            gv[vt.leader] -= gu[k] * vt.idm.d_closing;
            gv[k] += gu[k] * vt.idm.d_closing;
          }
          gv[k] += gu[k] * vt.idm.d_speed;
          break;
        case ControllerKind::kNetwork:
          if (vt.proj.side == ProjectedAction::Side::kLower) {
            add_bound(vt.bounds.lo, k, vt.leader, vt.follower, gu[k], gx, gv);
          } else if (vt.proj.side == ProjectedAction::Side::kUpper) {
            add_bound(vt.bounds.hi, k, vt.leader, vt.follower, gu[k], gx, gv);
          }
          break;
        default:
          break;
      }
    }

    for (const NetGroup& g : st.groups) {
      Eigen::RowVectorXd upstream(static_cast<Eigen::Index>(g.vehicles.size()));
      bool any = false;
      for (std::size_t c = 0; c < g.vehicles.size(); ++c) {
        const int k = g.vehicles[c];
        upstream(static_cast<Eigen::Index>(c)) = gu[k] * st.vehicles[k].proj.pass_through;
        any = any || upstream(static_cast<Eigen::Index>(c)) != 0.0;
      }
      if (!any) continue;
      Eigen::MatrixXd grad_obs;
      if (g.net == &trainable) {
        g.net->backward(g.cache, upstream, out.grad, &grad_obs);
      } else {
        Eigen::VectorXd discard = Eigen::VectorXd::Zero(g.net->params().size());
        g.net->backward(g.cache, upstream, discard, &grad_obs);
      }
      for (std::size_t c = 0; c < g.vehicles.size(); ++c) {
        observation_backward(g.obs[c], grad_obs.col(static_cast<Eigen::Index>(c)), gx, gv);
      }
    }

    lx = gx;
    lv = gv;
  }
  if (!out.grad.allFinite()) throw NumericalError("rollout_gradient: non-finite gradient");
  return out;
}

}  // namespace mpgdrive
