#include "mpgdrive/idm.hpp"

#include <algorithm>
#include <cmath>

#include "mpgdrive/dynamics.hpp"
#include "mpgdrive/errors.hpp"

namespace mpgdrive {

namespace {
// Gaps at or below this are treated as contact: full braking.
constexpr double kContactGap = 1e-3;
}  // namespace

void IdmParams::validate() const {
  if (!(desired_speed > 0.0 && time_headway > 0.0 && min_gap > 0.0 && max_accel > 0.0 && comfortable_decel > 0.0 &&
        exponent > 0.0)) {
    throw ConfigError("idm: all parameters must be positive");
  }
}

IdmPartials idm_acceleration_partials(double gap, double v, double closing_speed, const IdmParams& p) {
  IdmPartials out;
  if (gap <= kContactGap) {
    out.value = -kGravity;
    return out;
  }
  const double a = p.max_accel;
  const double ratio = v / p.desired_speed;
  const double free_term = std::pow(std::max(ratio, 0.0), p.exponent);
  const double d_free = v > 0.0 ? p.exponent * free_term / v : 0.0;
  double raw = a * (1.0 - free_term);
  double d_speed = -a * d_free;
  double d_gap = 0.0, d_closing = 0.0;
  if (std::isfinite(gap)) {
    const double root = 2.0 * std::sqrt(a * p.comfortable_decel);
    const double dyn = v * p.time_headway + v * closing_speed / root;
    const double s_star = p.min_gap + std::max(0.0, dyn);
    const double q = s_star / gap;
    raw -= a * q * q;
    d_gap = 2.0 * a * q * q / gap;
    if (dyn > 0.0) {
      const double k = -2.0 * a * q / gap;
      d_speed += k * (p.time_headway + closing_speed / root);
      d_closing = k * v / root;
    }
  }
  out.value = std::clamp(raw, -kGravity, kGravity);
  if (raw > -kGravity && raw < kGravity) {
    out.d_gap = d_gap;
    out.d_speed = d_speed;
    out.d_closing = d_closing;
  }
  return out;
}

double idm_acceleration(double gap, double v, double closing_speed, const IdmParams& p) {
  return idm_acceleration_partials(gap, v, closing_speed, p).value;
}

}  // namespace mpgdrive
