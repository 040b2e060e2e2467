#include "mpgdrive/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

void VehicleGeometry::validate() const {
  if (!(l_f > 0.0 && l_r > 0.0 && body_length > 0.0 && body_width > 0.0)) {
    throw DomainError("vehicle geometry: all lengths must be strictly positive");
  }
  if (l_f + l_r > body_length) {
    throw DomainError("vehicle geometry: wheelbase exceeds body length");
  }
}

double slip_angle(double delta_f, const VehicleGeometry& geom) {
  if (!std::isfinite(delta_f)) throw DomainError("slip_angle: non-finite steering angle");
  if (std::abs(delta_f) >= std::numbers::pi / 2) {
    throw DomainError("slip_angle: |delta_f| must be below pi/2");
  }
  return std::atan(geom.l_r / (geom.l_r + geom.l_f) * std::tan(delta_f));
}

StepResult step_vehicle(const VehicleState& s, const VehicleAction& a, double dt,
                        const VehicleGeometry& geom, double v_max) {
  if (!(dt > 0.0)) throw DomainError("step_vehicle: dt must be positive");
  const double beta = slip_angle(a.delta_f, geom);
  StepResult out;
  out.state.x = s.x + s.v * std::cos(s.phi + beta) * dt;
  out.state.y = s.y + s.v * std::sin(s.phi + beta) * dt;
  const double v_raw = s.v + a.u * dt;
  out.state.v = std::clamp(v_raw, 0.0, v_max);
  out.speed_clamped = v_raw < 0.0 || v_raw > v_max;
  out.state.phi = s.phi + s.v / geom.l_r * std::sin(beta) * dt;
  return out;
}

StepJacobian step_vehicle_jacobian(const VehicleState& s, const VehicleAction& a, double dt,
                                   const VehicleGeometry& geom, double v_max) {
  const double k = geom.l_r / (geom.l_r + geom.l_f);
  const double tan_d = std::tan(a.delta_f);
  const double beta = std::atan(k * tan_d);
  const double dbeta = k * (1.0 + tan_d * tan_d) / (1.0 + k * k * tan_d * tan_d);
  const double c = std::cos(s.phi + beta);
  const double sn = std::sin(s.phi + beta);
  const double v_raw = s.v + a.u * dt;
  const bool inside = v_raw >= 0.0 && v_raw <= v_max;

  StepJacobian j;
  j.wrt_state.setIdentity();
  j.wrt_state(0, 2) = c * dt;
  j.wrt_state(0, 3) = -s.v * sn * dt;
  j.wrt_state(1, 2) = sn * dt;
  j.wrt_state(1, 3) = s.v * c * dt;
  j.wrt_state(2, 2) = inside ? 1.0 : 0.0;
  j.wrt_state(3, 2) = std::sin(beta) * dt / geom.l_r;

  j.wrt_action.setZero();
  j.wrt_action(0, 1) = -s.v * sn * dt * dbeta;
  j.wrt_action(1, 1) = s.v * c * dt * dbeta;
  j.wrt_action(2, 0) = inside ? dt : 0.0;
  j.wrt_action(3, 1) = s.v / geom.l_r * std::cos(beta) * dt * dbeta;
  return j;
}

double time_to_collision(double gap, double closing_speed) {
  if (!(gap >= 0.0)) throw DomainError("time_to_collision: gap must be non-negative");
  if (closing_speed <= 0.0) return std::numeric_limits<double>::infinity();
  return gap / closing_speed;
}

FeasibleBounds feasible_action_bounds(const VehicleState& ego, const std::optional<VehicleState>& leader,
                                      const std::optional<VehicleState>& follower, double dt, double tau_s,
                                      const VehicleGeometry& geom, double v_max) {
  if (!(tau_s > 0.0)) throw DomainError("feasible_action_interval: tau_s must be positive");
  if (!(dt > 0.0)) throw DomainError("feasible_action_interval: dt must be positive");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Each neighbour bounds the next-step ego speed v' = v + u dt; neighbours
  // coast (u = 0, delta_f = 0) over the step. Bounds on v' at 0 or v_max are
  // reached by the speed clamp and leave u open.
  const double cos_e = std::cos(ego.phi);
  const double ego_next_x = ego.x + ego.v * cos_e * dt;
  double u_hi = kInf, u_lo = -kInf;
  BoundSensitivity hi_s, lo_s;

  if (leader) {
    const double cos_l = std::cos(leader->phi);
    const double raw_gap = leader->x + leader->v * cos_l * dt - ego_next_x - geom.body_length;
    const double gap = std::max(raw_gap, 0.0);
    const double bound = (leader->v * cos_l + gap / tau_s) / cos_e;
    if (bound < v_max) {
      const double open = raw_gap > 0.0 ? 1.0 : 0.0;
      u_hi = (bound - ego.v) / dt;
      hi_s.leader_x = open / (tau_s * cos_e) / dt;
      hi_s.leader_v = (cos_l + open * cos_l * dt / tau_s) / cos_e / dt;
      hi_s.ego_x = -open / (tau_s * cos_e) / dt;
      hi_s.ego_v = (-open * dt / tau_s - 1.0) / dt;
    }
  }
  if (follower) {
    const double cos_f = std::cos(follower->phi);
    const double raw_gap = ego_next_x - follower->x - follower->v * cos_f * dt - geom.body_length;
    const double gap = std::max(raw_gap, 0.0);
    const double bound = (follower->v * cos_f - gap / tau_s) / cos_e;
    if (bound > 0.0) {
      const double open = raw_gap > 0.0 ? 1.0 : 0.0;
      u_lo = (bound - ego.v) / dt;
      lo_s.follower_x = open / (tau_s * cos_e) / dt;
      lo_s.follower_v = (cos_f + open * cos_f * dt / tau_s) / cos_e / dt;
      lo_s.ego_x = -open / (tau_s * cos_e) / dt;
      lo_s.ego_v = (-open * dt / tau_s - 1.0) / dt;
    }
  }

  FeasibleBounds out;
  AccelInterval& iv = out.interval;
  if (u_lo > u_hi) {
    // Conflicting neighbours: split the violation evenly.
    const double mid = 0.5 * (u_lo + u_hi);
    iv.fallback = true;
    iv.lo = iv.hi = std::clamp(mid, -kGravity, kGravity);
    if (mid > -kGravity && mid < kGravity) {
      BoundSensitivity m;
      m.ego_x = 0.5 * (lo_s.ego_x + hi_s.ego_x);
      m.ego_v = 0.5 * (lo_s.ego_v + hi_s.ego_v);
      m.leader_x = 0.5 * hi_s.leader_x;
      m.leader_v = 0.5 * hi_s.leader_v;
      m.follower_x = 0.5 * lo_s.follower_x;
      m.follower_v = 0.5 * lo_s.follower_v;
      out.lo = out.hi = m;
    }
    return out;
  }
  if (u_lo > kGravity || u_hi < -kGravity) {
    iv.fallback = true;
    iv.lo = iv.hi = u_lo > kGravity ? kGravity : -kGravity;
    return out;
  }
  if (u_lo > -kGravity) {
    iv.lo = u_lo;
    out.lo = lo_s;
  }
  if (u_hi < kGravity) {
    iv.hi = u_hi;
    out.hi = hi_s;
  }
  return out;
}

AccelInterval feasible_action_interval(const VehicleState& ego, const std::optional<VehicleState>& leader,
                                       const std::optional<VehicleState>& follower, double dt, double tau_s,
                                       const VehicleGeometry& geom, double v_max) {
  return feasible_action_bounds(ego, leader, follower, dt, tau_s, geom, v_max).interval;
}

Eigen::Vector2d bounding_half_extents(const VehicleState& s, const VehicleGeometry& geom) {
  const double c = std::abs(std::cos(s.phi));
  const double sn = std::abs(std::sin(s.phi));
  return {0.5 * geom.body_length * c + 0.5 * geom.body_width * sn,
          0.5 * geom.body_length * sn + 0.5 * geom.body_width * c};
}

std::optional<std::pair<int, int>> detect_collision(std::span<const VehicleState> states,
                                                    std::span<const VehicleGeometry> geoms) {
  const int n = static_cast<int>(states.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d hi = bounding_half_extents(states[i], geoms[i]);
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector2d hj = bounding_half_extents(states[j], geoms[j]);
      if (std::abs(states[i].x - states[j].x) < hi.x() + hj.x() &&
          std::abs(states[i].y - states[j].y) < hi.y() + hj.y()) {
        return std::make_pair(i, j);
      }
    }
  }
  return std::nullopt;
}

double box_distance(const VehicleState& a, const VehicleGeometry& ga, const VehicleState& b,
                    const VehicleGeometry& gb) {
  const Eigen::Vector2d ha = bounding_half_extents(a, ga);
  const Eigen::Vector2d hb = bounding_half_extents(b, gb);
  const double dx = std::max(0.0, std::abs(a.x - b.x) - ha.x() - hb.x());
  const double dy = std::max(0.0, std::abs(a.y - b.y) - ha.y() - hb.y());
  return std::hypot(dx, dy);
}

}  // namespace mpgdrive
