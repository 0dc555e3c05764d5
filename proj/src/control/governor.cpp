#include "hydroflex/control/governor.hpp"

#include <algorithm>
#include <cmath>

#include "hydroflex/errors.hpp"

namespace hydroflex::control {

Governor::Governor(GovernorParams params, double y0) : p_(params) {
  if (!(p_.rate_open_pu_s > 0.0) || !(p_.rate_close_pu_s > 0.0)) {
    throw ConfigError("governor rate limits must be positive");
  }
  if (!(p_.y_min < p_.y_max)) throw ConfigError("governor opening limits are empty");
  if (!(p_.power_base_mw > 0.0)) throw ConfigError("governor power base must be positive");
  reset(y0);
}

void Governor::reset(double y0) {
  y_ = std::clamp(y0, p_.y_min, p_.y_max);
  u_ = y_;
  bias_ = y_;
  integral_ = 0.0;
  d_state_ = 0.0;
  prev_error_ = 0.0;
  first_ = true;
  saturated_ = false;
  travel_ = 0.0;
}

double Governor::step_speed(double n_ref_pu, double n_pu, double dt, double feedforward) {
  return step_error(n_ref_pu - n_pu, dt, feedforward);
}

double Governor::step_power(double p_ref_mw, double p_mw, double df_hz, double dt) {
  double droop = 0.0;
  if (p_.permanent_droop > 0.0) {
    droop = -df_hz / (p_.nominal_frequency_hz * p_.permanent_droop);
    if (p_.droop_limit_mw > 0.0) {
      const double lim = p_.droop_limit_mw / p_.power_base_mw;
      droop = std::clamp(droop, -lim, lim);
    }
  }
  return step_error((p_ref_mw - p_mw) / p_.power_base_mw + droop, dt);
}

double Governor::step_error(double e, double dt, double ff) {
  if (first_) {
    prev_error_ = e;
    first_ = false;
  }
  // Filtered derivative, backward Euler.
  const double tf = p_.derivative_filter_s;
  const double raw_d = (e - prev_error_) / dt;
  d_state_ = tf > 0.0 ? (tf * d_state_ + dt * raw_d) / (tf + dt) : raw_d;
  prev_error_ = e;

  const double trial_integral = integral_ + p_.ki * e * dt;
  double u = bias_ + ff + p_.kp * e + trial_integral + p_.kd * d_state_;
  const bool high = u > p_.y_max, low = u < p_.y_min;
  // Conditional integration: freeze the integrator while it would deepen saturation.
  if (!((high && e > 0.0) || (low && e < 0.0))) integral_ = trial_integral;
  u = std::clamp(bias_ + ff + p_.kp * e + integral_ + p_.kd * d_state_, p_.y_min, p_.y_max);
  u_ = u;

  const double ts = p_.servo_time_constant_s;
  double rate = ts > 0.0 ? (u - y_) / ts : (u - y_) / dt;
  rate = std::clamp(rate, -p_.rate_close_pu_s, p_.rate_open_pu_s);
  double y = y_ + rate * dt;
  if ((u - y_) * (u - y) < 0.0) y = u;  // no overshoot of the command
  y = std::clamp(y, p_.y_min, p_.y_max);
  saturated_ = high || low || rate == p_.rate_open_pu_s || rate == -p_.rate_close_pu_s;
  travel_ += std::abs(y - y_);
  y_ = y;
  return y_;
}

}  // namespace hydroflex::control
