#pragma once

#include <optional>
#include <span>
#include <utility>

#include <Eigen/Dense>

namespace mpgdrive {

inline constexpr double kGravity = 9.81;
inline constexpr double kMaxSpeed = 30.0;

struct VehicleGeometry {
  double l_f = 1.4;
  double l_r = 1.4;
  double body_length = 4.5;
  double body_width = 1.8;

  /// Throws DomainError unless all lengths are positive and the axles fit in the body.
  void validate() const;
};

/// Kinematic state of a vehicle's centre of mass.
struct VehicleState {
  double x = 0.0;    // longitudinal position (m)
  double y = 0.0;    // lateral position (m)
  double v = 0.0;    // speed (m/s)
  double phi = 0.0;  // heading (rad)

  bool operator==(const VehicleState&) const = default;
};

struct VehicleAction {
  double u = 0.0;        // acceleration (m/s^2)
  double delta_f = 0.0;  // front-wheel steering angle (rad)
};

double slip_angle(double delta_f, const VehicleGeometry& geom);

struct StepResult {
  VehicleState state;
  bool speed_clamped = false;
};

/// One forward-Euler step of the kinematic bicycle model. The speed is
/// projected onto [0, v_max] after the update.
StepResult step_vehicle(const VehicleState& s, const VehicleAction& a, double dt,
                        const VehicleGeometry& geom, double v_max = kMaxSpeed);

/// Partial derivatives of step_vehicle. Columns of `wrt_action` are (u, delta_f).
/// When the speed was clamped its row is zero.
struct StepJacobian {
  Eigen::Matrix4d wrt_state;
  Eigen::Matrix<double, 4, 2> wrt_action;
};

StepJacobian step_vehicle_jacobian(const VehicleState& s, const VehicleAction& a, double dt,
                                   const VehicleGeometry& geom, double v_max = kMaxSpeed);

/// Gap over closing speed; +infinity when the vehicles are not closing.
double time_to_collision(double gap, double closing_speed);

struct AccelInterval {
  double lo = -kGravity;
  double hi = kGravity;
  // Set when no acceleration satisfied the constraints; lo == hi is then the
  // action in [-g, g] with the smallest worst-case constraint violation.
  bool fallback = false;

  bool contains(double u) const { return u >= lo && u <= hi; }
};

/// Accelerations in [-g, g] that keep the bumper-to-bumper TTC to the leader
/// and from the follower at or above tau_s after one straight-line step. The
/// neighbours are assumed to hold their speed over the step. When no such
/// action exists the singleton closest to satisfying both constraints is
/// returned: the midpoint of two conflicting bounds, or the action limit
/// nearest to a single unreachable bound, clipped to [-g, g].
AccelInterval feasible_action_interval(const VehicleState& ego,
                                       const std::optional<VehicleState>& leader,
                                       const std::optional<VehicleState>& follower, double dt,
                                       double tau_s, const VehicleGeometry& geom,
                                       double v_max = kMaxSpeed);

/// Partial derivatives of one interval bound with respect to the longitudinal
/// position and speed of the ego and its neighbours. All zero when the bound
/// is a constant (action or speed limit).
struct BoundSensitivity {
  double ego_x = 0.0, ego_v = 0.0;
  double leader_x = 0.0, leader_v = 0.0;
  double follower_x = 0.0, follower_v = 0.0;
};

struct FeasibleBounds {
  AccelInterval interval;
  BoundSensitivity lo;
  BoundSensitivity hi;
};

/// feasible_action_interval together with the sensitivities of its bounds.
FeasibleBounds feasible_action_bounds(const VehicleState& ego, const std::optional<VehicleState>& leader,
                                      const std::optional<VehicleState>& follower, double dt, double tau_s,
                                      const VehicleGeometry& geom, double v_max = kMaxSpeed);

/// Half extents of the axis-aligned box enclosing the heading-rotated body.
Eigen::Vector2d bounding_half_extents(const VehicleState& s, const VehicleGeometry& geom);

/// First pair (i < j, lexicographic) whose boxes overlap with positive area.
std::optional<std::pair<int, int>> detect_collision(std::span<const VehicleState> states,
                                                    std::span<const VehicleGeometry> geoms);

/// Euclidean distance between the closest points of two bounding boxes (0 when overlapping).
double box_distance(const VehicleState& a, const VehicleGeometry& ga, const VehicleState& b,
                    const VehicleGeometry& gb);

}  // namespace mpgdrive
