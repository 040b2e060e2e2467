#pragma once

namespace mpgdrive {

/// Intelligent Driver Model parameters.
struct IdmParams {
  double desired_speed = 15.0;  // v0
  double time_headway = 1.5;    // T_h
  double min_gap = 2.0;         // s0
  double max_accel = 1.5;
  double comfortable_decel = 2.0;
  double exponent = 4.0;

  void validate() const;
};

/// IDM acceleration for a bumper gap, own speed and closing speed (v - v_leader),
/// clamped to [-g, g]. An infinite gap means no leader.
double idm_acceleration(double gap, double v, double closing_speed, const IdmParams& p);

struct IdmPartials {
  double value = 0.0;
  double d_gap = 0.0;
  double d_speed = 0.0;
  double d_closing = 0.0;
};

/// Value and partial derivatives; all partials vanish when the clamp is active.
IdmPartials idm_acceleration_partials(double gap, double v, double closing_speed, const IdmParams& p);

}  // namespace mpgdrive
