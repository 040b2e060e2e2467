#include "mpgdrive/merge_abstraction.hpp"

#include <algorithm>
#include <cmath>

#include "mpgdrive/dynamics.hpp"
#include "mpgdrive/errors.hpp"
#include "mpgdrive/game_generators.hpp"
#include "mpgdrive/merge_world.hpp"

namespace mpgdrive {

std::vector<double> Grid::weights(double value) const {
  std::vector<double> w(count, 0.0);
  if (count == 1 || value <= lo) {
    w.front() = 1.0;
    return w;
  }
  if (value >= hi) {
    w.back() = 1.0;
    return w;
  }
  const double pos = (value - lo) / (hi - lo) * (count - 1);
  const int k = std::min(static_cast<int>(std::floor(pos)), count - 2);
  const double frac = pos - k;
  w[k] = 1.0 - frac;
  w[k + 1] = frac;
  return w;
}

namespace {

struct LocalState {
  double x, v;
};

LocalState local_state(const Grid& xs, const Grid& vs, int s) {
  return {xs.centre(s / vs.count), vs.centre(s % vs.count)};
}

Eigen::MatrixXd local_kernel(const Grid& xs, const Grid& vs, const MergeAbstractionConfig& c) {
  const int l = xs.count * vs.count;
  const int a = static_cast<int>(c.accels.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(l * a, l);
  const VehicleGeometry geom;
  for (int s = 0; s < l; ++s) {
    const LocalState ls = local_state(xs, vs, s);
    for (int u = 0; u < a; ++u) {
      const VehicleState next = step_vehicle({ls.x, 0.0, ls.v, 0.0}, {c.accels[u], 0.0}, c.dt, geom).state;
      const std::vector<double> wx = xs.weights(next.x);
      const std::vector<double> wv = vs.weights(next.v);
      for (int bx = 0; bx < xs.count; ++bx)
        for (int bv = 0; bv < vs.count; ++bv) k(s * a + u, bx * vs.count + bv) = wx[bx] * wv[bv];
    }
  }
  return k;
}

}  // namespace

MergeAbstraction export_merge_abstraction(const MergeAbstractionConfig& c) {
  c.reward.validate();
  for (const Grid* g : {&c.ramp_x, &c.target_x, &c.speed}) {
    if (g->count < 1 || !(g->hi >= g->lo)) throw ConfigError("merge abstraction: invalid grid");
  }
  if (c.accels.empty()) throw ConfigError("merge abstraction: no actions");
  if (!(c.dt > 0.0)) throw ConfigError("merge abstraction: dt must be positive");

  tabular::TabularGame g;
  g.n_agents = 2;
  const int a = static_cast<int>(c.accels.size());
  g.actions = {a, a};
  g.local_states = {c.ramp_x.count * c.speed.count, c.target_x.count * c.speed.count};
  g.states = g.local_states[0] * g.local_states[1];
  g.gamma = c.gamma;
  g.rho = Eigen::VectorXd::Constant(g.states, 1.0 / g.states);
  tabular::fill_product_transition(g, {local_kernel(c.ramp_x, c.speed, c), local_kernel(c.target_x, c.speed, c)});

  const RoadGeometry road{c.reward.conflict_x};
  const auto global = [&](int s0, int s1) {
    const LocalState r = local_state(c.ramp_x, c.speed, s0);
    const LocalState t = local_state(c.target_x, c.speed, s1);
    GlobalState s;
    s.vehicles = {{r.x, road.target_y - road.lane_width, r.v, 0.0}, {t.x, road.target_y, t.v, 0.0}};
    s.lanes = {Lane::kRamp, Lane::kTarget};
    apply_merge(s, road);
    return s;
  };

  // Declared decomposition: self terms per agent, one shared pair table.
  auto& st = g.structure;
  st.self.clear();
  const Grid* xs[2] = {&c.ramp_x, &c.target_x};
  for (int i = 0; i < 2; ++i) {
    Eigen::MatrixXd t(g.local_states[i], a);
    for (int s = 0; s < g.local_states[i]; ++s) {
      const LocalState ls = local_state(*xs[i], c.speed, s);
      for (int u = 0; u < a; ++u) {
        t(s, u) = c.reward.w_speed * speed_tracking_reward(ls.v, c.reward.desired_speed) +
                  c.reward.w_comfort * comfort_reward(c.accels[u]);
      }
    }
    st.self.push_back(std::move(t));
  }
  st.pair.assign(2, std::vector<std::vector<double>>(2));
  const int l0 = g.local_states[0], l1 = g.local_states[1];
  st.pair[0][1].resize(static_cast<std::size_t>(l0) * l1 * a * a);
  st.pair[1][0].resize(st.pair[0][1].size());
  for (int s0 = 0; s0 < l0; ++s0)
    for (int s1 = 0; s1 < l1; ++s1) {
      const GlobalState s = global(s0, s1);
      const double value = s.lanes[0] == s.lanes[1]
                               ? c.reward.w_ttc * same_lane_ttc_reward(s.vehicles[0].x, s.vehicles[0].v,
                                                                      s.vehicles[1].x, s.vehicles[1].v, c.reward)
                               : c.reward.w_conflict * conflict_time_gap_reward(s.vehicles[0].x, s.vehicles[0].v,
                                                                               s.vehicles[1].x, s.vehicles[1].v,
                                                                               c.reward);
      for (int u0 = 0; u0 < a; ++u0)
        for (int u1 = 0; u1 < a; ++u1) {
          st.pair[0][1][((static_cast<std::size_t>(s0) * l1 + s1) * a + u0) * a + u1] = value;
          st.pair[1][0][((static_cast<std::size_t>(s1) * l0 + s0) * a + u1) * a + u0] = value;
        }
    }

  // Rewards and potential straight from the simulator's reward functions.
  MergeAbstraction out;
  g.rewards.assign(2, Eigen::MatrixXd::Zero(g.states, g.joint_actions()));
  out.potential = Eigen::MatrixXd::Zero(g.states, g.joint_actions());
  std::vector<int> loc(2), act(2);
  for (int s = 0; s < g.states; ++s) {
    g.decode_state(s, loc);
    const GlobalState gs = global(loc[0], loc[1]);
    for (int ja = 0; ja < g.joint_actions(); ++ja) {
      g.decode_actions(ja, act);
      const double accel[2] = {c.accels[act[0]], c.accels[act[1]]};
      for (int i = 0; i < 2; ++i) g.rewards[i](s, ja) = agent_reward(gs, accel, i, c.reward);
      out.potential(s, ja) = potential_function(gs, accel, c.reward);
    }
  }
  g.validate();
  out.game = std::move(g);
  return out;
}

}  // namespace mpgdrive
