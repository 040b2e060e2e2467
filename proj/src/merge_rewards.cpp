#include "mpgdrive/merge_rewards.hpp"

#include <cmath>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// d r / d (x_i, v_i, x_j, v_j) for a pair term.
struct PairPartials {
  double value, dxi, dvi, dxj, dvj;
};

PairPartials ttc_partials(double xi, double vi, double xj, double vj, const MergeRewardSpec& spec) {
  const double d = std::abs(xi - xj);
  const double w = std::abs(vi - vj);
  const double sd = sign(xi - xj);
  const double sw = sign(vi - vj);
  PairPartials p{};
  if (w <= spec.rel_speed_threshold) {
    const double denom = d / spec.rel_speed_threshold + spec.eps;
    p.value = -1.0 / denom;
    const double dd = 1.0 / (denom * denom) / spec.rel_speed_threshold;
    p.dxi = dd * sd;
    p.dxj = -dd * sd;
  } else {
    const double denom = d / w + spec.eps;
    p.value = -1.0 / denom;
    const double inv2 = 1.0 / (denom * denom);
    const double dd = inv2 / w;
    const double dw = -inv2 * d / (w * w);
    p.dxi = dd * sd;
    p.dxj = -dd * sd;
    p.dvi = dw * sw;
    p.dvj = -dw * sw;
  }
  return p;
}

// Distance to the conflict point entering the arrival time, and its x-derivative.
double conflict_distance(double x, const MergeRewardSpec& spec) {
  return spec.signed_arrival_time ? spec.conflict_x - x : std::abs(x - spec.conflict_x);
}

double conflict_distance_dx(double x, const MergeRewardSpec& spec) {
  return spec.signed_arrival_time ? -1.0 : sign(x - spec.conflict_x);
}

PairPartials conflict_partials(double xi, double vi, double xj, double vj, const MergeRewardSpec& spec) {
  const double ai = conflict_distance(xi, spec), aj = conflict_distance(xj, spec);
  const double ti = ai / (vi + spec.eps), tj = aj / (vj + spec.eps);
  const double prod = ti * tj;
  const double root = std::sqrt(std::abs(prod));
  const double diff = ti - tj;
  const double denom = root * diff * diff + spec.eps;
  PairPartials p{};
  p.value = -1.0 / denom;
  const double dr = 1.0 / (denom * denom);
  // d(root)/dt_i = sign(t_i t_j) t_j / (2 root); zero subgradient when a vehicle sits on the conflict point.
  const double sp = sign(prod);
  const double droot_i = root > 0.0 ? sp * tj / (2.0 * root) : 0.0;
  const double droot_j = root > 0.0 ? sp * ti / (2.0 * root) : 0.0;
  const double dti = dr * (droot_i * diff * diff + 2.0 * root * diff);
  const double dtj = dr * (droot_j * diff * diff - 2.0 * root * diff);
  p.dxi = dti * conflict_distance_dx(xi, spec) / (vi + spec.eps);
  p.dvi = -dti * ai / ((vi + spec.eps) * (vi + spec.eps));
  p.dxj = dtj * conflict_distance_dx(xj, spec) / (vj + spec.eps);
  p.dvj = -dtj * aj / ((vj + spec.eps) * (vj + spec.eps));
  return p;
}

PairPartials pair_partials(const GlobalState& s, int i, int j, const MergeRewardSpec& spec) {
  const VehicleState& a = s.vehicles[i];
  const VehicleState& b = s.vehicles[j];
  PairPartials p = s.lanes[i] == s.lanes[j] ? ttc_partials(a.x, a.v, b.x, b.v, spec)
                                            : conflict_partials(a.x, a.v, b.x, b.v, spec);
  const double w = s.lanes[i] == s.lanes[j] ? spec.w_ttc : spec.w_conflict;
  p.value *= w;
  p.dxi *= w;
  p.dvi *= w;
  p.dxj *= w;
  p.dvj *= w;
  return p;
}

double pair_value(const GlobalState& s, int i, int j, const MergeRewardSpec& spec) {
  const VehicleState& a = s.vehicles[i];
  const VehicleState& b = s.vehicles[j];
  if (s.lanes[i] == s.lanes[j]) return spec.w_ttc * same_lane_ttc_reward(a.x, a.v, b.x, b.v, spec);
  return spec.w_conflict * conflict_time_gap_reward(a.x, a.v, b.x, b.v, spec);
}

double self_value(const GlobalState& s, std::span<const double> accel, int i, const MergeRewardSpec& spec) {
  return spec.w_speed * speed_tracking_reward(s.vehicles[i].v, spec.desired_speed) +
         spec.w_comfort * comfort_reward(accel[i]);
}

void add_self_gradient(const GlobalState& s, std::span<const double> accel, int i, const MergeRewardSpec& spec,
                       double weight, RewardGradient& grad) {
  grad.dv[i] += weight * spec.w_speed * -2.0 * (s.vehicles[i].v - spec.desired_speed);
  grad.du[i] += weight * spec.w_comfort * -2.0 * accel[i];
}

void add_pair_gradient(const GlobalState& s, int i, int j, const MergeRewardSpec& spec, double weight,
                       RewardGradient& grad) {
  const PairPartials p = pair_partials(s, i, j, spec);
  grad.dx[i] += weight * p.dxi;
  grad.dv[i] += weight * p.dvi;
  grad.dx[j] += weight * p.dxj;
  grad.dv[j] += weight * p.dvj;
}

}  // namespace

void MergeRewardSpec::validate() const {
  if (!(eps > 0.0)) throw ConfigError("reward: eps must be positive");
  if (!(desired_speed > 0.0 && desired_speed <= kMaxSpeed)) throw ConfigError("reward: desired speed must lie in (0, 30]");
  if (!(rel_speed_threshold > 0.0)) throw ConfigError("reward: relative-speed threshold must be positive");
  if (!(tau_s > 0.0)) throw ConfigError("reward: tau_s must be positive");
}

double speed_tracking_reward(double v, double desired_speed) {
  const double e = v - desired_speed;
  return -e * e;
}

double comfort_reward(double u) { return -u * u; }

double same_lane_ttc_reward(double x_i, double v_i, double x_j, double v_j, const MergeRewardSpec& spec) {
  const double d = std::abs(x_i - x_j);
  const double w = std::abs(v_i - v_j);
  if (w <= spec.rel_speed_threshold) return -1.0 / (d / spec.rel_speed_threshold + spec.eps);
  return -1.0 / (d / w + spec.eps);
}

double conflict_time_gap_reward(double x_i, double v_i, double x_j, double v_j, const MergeRewardSpec& spec) {
  const double ti = conflict_distance(x_i, spec) / (v_i + spec.eps);
  const double tj = conflict_distance(x_j, spec) / (v_j + spec.eps);
  const double diff = ti - tj;
  return -1.0 / (std::sqrt(std::abs(ti * tj)) * diff * diff + spec.eps);
}

double agent_reward(const GlobalState& state, std::span<const double> accel, int agent, const MergeRewardSpec& spec) {
  double r = self_value(state, accel, agent, spec);
  for (int j = 0; j < state.size(); ++j) {
    if (j != agent) r += pair_value(state, agent, j, spec);
  }
  return r;
}

double potential_function(const GlobalState& state, std::span<const double> accel, const MergeRewardSpec& spec) {
  double phi = 0.0;
  for (int i = 0; i < state.size(); ++i) {
    phi += self_value(state, accel, i, spec);
    for (int j = 0; j < i; ++j) phi += pair_value(state, i, j, spec);
  }
  return phi;
}

void agent_reward_gradient(const GlobalState& state, std::span<const double> accel, int agent,
                           const MergeRewardSpec& spec, double weight, RewardGradient& grad) {
  add_self_gradient(state, accel, agent, spec, weight, grad);
  for (int j = 0; j < state.size(); ++j) {
    if (j != agent) add_pair_gradient(state, agent, j, spec, weight, grad);
  }
}

void potential_gradient(const GlobalState& state, std::span<const double> accel, const MergeRewardSpec& spec,
                        double weight, RewardGradient& grad) {
  for (int i = 0; i < state.size(); ++i) {
    add_self_gradient(state, accel, i, spec, weight, grad);
    for (int j = 0; j < i; ++j) add_pair_gradient(state, i, j, spec, weight, grad);
  }
}

}  // namespace mpgdrive
