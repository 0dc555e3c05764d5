#include "hydroflex/control/reserves.hpp"

#include <algorithm>
#include <cmath>

#include "hydroflex/errors.hpp"

namespace hydroflex::control {

double fcr_command(const FcrController& c, double f_meas_hz) {
  const double df = f_meas_hz - c.nominal_frequency_hz;
  if (std::abs(df) <= c.deadband_hz) return 0.0;
  const double dp = -df / (c.permanent_droop * c.nominal_frequency_hz) * c.power_base_mw;
  return std::clamp(dp, -c.reserve_mw, c.reserve_mw);
}

FirstOrderHoldFilter::FirstOrderHoldFilter(double time_constant_s, double dt, double initial)
    : y_(initial), u_(initial) {
  if (!(time_constant_s > 0.0) || !(dt > 0.0)) throw ConfigError("filter constants must be positive");
  a_ = std::exp(-dt / time_constant_s);
  const double r = time_constant_s * (1.0 - a_) / dt;
  b0_ = 1.0 - r;
  b1_ = r - a_;
}

double FirstOrderHoldFilter::step(double u_next) {
  y_ = a_ * y_ + b0_ * u_next + b1_ * u_;
  u_ = u_next;
  return y_;
}

double afrr_raw_setpoint(const AfrrController& c, double p_start_mw, double direction, double t_s) {
  const double s = std::clamp(t_s / c.ramp_duration_s, 0.0, 1.0);
  return p_start_mw + direction * 2.0 * c.reserve_band_mw * s;
}

std::vector<double> afrr_filtered_setpoint(const AfrrController& c, const std::vector<double>& raw, double dt) {
  std::vector<double> out;
  if (raw.empty()) return out;
  out.reserve(raw.size());
  FirstOrderHoldFilter f(c.filter_time_constant_s, dt, raw.front());
  out.push_back(raw.front());
  for (std::size_t k = 1; k < raw.size(); ++k) out.push_back(f.step(raw[k]));
  return out;
}

RocofEstimator::RocofEstimator(double window_s, double dt, double f0_hz) : dt_(dt), f_prev_(f0_hz) {
  if (!(dt > 0.0) || window_s < 0.0) throw ConfigError("invalid RoCoF estimator constants");
  a_ = window_s > 0.0 ? std::exp(-dt / window_s) : 0.0;
}

double RocofEstimator::step(double f_hz) {
  x_ = a_ * x_ + (1.0 - a_) * (f_hz - f_prev_) / dt_;
  f_prev_ = f_hz;
  return x_;
}

double inertia_emulation(double rocof_hz_s, double tau_m_s, double power_base_mw, double nominal_frequency_hz) {
  return -tau_m_s * power_base_mw * rocof_hz_s / nominal_frequency_hz;
}

double ffr_activation_time_for_level(double level_hz) {
  if (std::abs(level_hz - 49.5) < 1e-9) return 0.70;
  if (std::abs(level_hz - 49.6) < 1e-9) return 1.00;
  if (std::abs(level_hz - 49.7) < 1e-9) return 1.30;
  throw ConfigError("FFR activation level must be 49.5, 49.6 or 49.7 Hz");
}

FfrController::FfrController(FfrParams params) : p_(params) {
  if (!(p_.capacity_mw > 0.0)) throw ConfigError("FFR capacity must be positive");
  if (!(p_.full_activation_s > 0.0)) throw ConfigError("FFR activation time must be positive");
  if (p_.deactivation_rate_mw_s < 0.0) throw ConfigError("FFR deactivation rate must be non-negative");
  if (p_.hold_margin_s < 0.0) throw ConfigError("FFR hold margin must be non-negative");
}

double FfrController::step(double t, double f_hz) {
  const bool below = f_hz <= p_.activation_level_hz;
  const bool crossing = below && !below_;
  below_ = below;
  if (crossing) {
    if ((phase_ == Phase::Idle || phase_ == Phase::Recovering) && t >= ready_at_) {
      phase_ = Phase::Ramping;
      t_start_ = t;
      ready_at_ = t + p_.recovery_s;
      ++activations_;
    } else {
      ++rejected_;
    }
  }
  switch (phase_) {
    case Phase::Idle:
      command_ = 0.0;
      break;
    case Phase::Ramping:
      command_ = p_.capacity_mw * std::min(1.0, (t - t_start_) / p_.full_activation_s);
      if (t - t_start_ >= p_.full_activation_s) phase_ = Phase::Holding;
      break;
    case Phase::Holding:
      command_ = p_.capacity_mw;
      if (t - t_start_ >= p_.full_activation_s + p_.support_s() + p_.hold_margin_s) {
        phase_ = Phase::Deactivating;
        t_release_ = t;
      }
      break;
    case Phase::Deactivating:
      if (p_.deactivation_rate_mw_s > 0.0) {
        command_ = std::max(0.0, p_.capacity_mw - p_.deactivation_rate_mw_s * (t - t_release_));
      } else {
        command_ = 0.0;
      }
      if (command_ <= 0.0) phase_ = Phase::Recovering;
      break;
    case Phase::Recovering:
      command_ = 0.0;
      break;
  }
  return command_;
}

}  // namespace hydroflex::control
