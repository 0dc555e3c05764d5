#pragma once

namespace hydroflex::control {

struct GovernorParams {
  double kp = 1.0;
  double ki = 0.2;   // 1/s
  double kd = 0.0;   // s
  double derivative_filter_s = 0.1;
  double permanent_droop = 0.0085;  // Bs, pu frequency per pu power
  double servo_time_constant_s = 0.2;
  double rate_open_pu_s = 0.1;
  double rate_close_pu_s = 0.1;
  double y_min = 0.0;
  double y_max = 1.0;
  double power_base_mw = 1.0;
  double nominal_frequency_hz = 50.0;
  double droop_limit_mw = 0.0;  // clamp of the droop term, 0 for none
};

enum class GovernorMode { Speed, PowerDroop };

/// PID governor with conditional-integration anti-windup driving a
/// rate-limited first-order guide-vane servo.
class Governor {
 public:
  Governor(GovernorParams params, double y0);

  /// Speed mode, e = n_ref - n in per unit of synchronous speed. The
  /// feedforward is added to the opening command.
  double step_speed(double n_ref_pu, double n_pu, double dt, double feedforward = 0.0);
  /// Power mode with permanent droop, e = (P_ref - P)/P_base - df/(f_n Bs).
  double step_power(double p_ref_mw, double p_mw, double df_hz, double dt);
  /// Generic step on a precomputed per-unit error.
  double step_error(double error_pu, double dt, double feedforward = 0.0);

  double opening() const { return y_; }
  double command() const { return u_; }
  bool saturated() const { return saturated_; }
  /// Total guide-vane travel sum |dy|.
  double travel() const { return travel_; }
  const GovernorParams& params() const { return p_; }
  GovernorParams& params() { return p_; }
  void reset(double y0);

 private:
  GovernorParams p_;
  double y_ = 0.0;
  double u_ = 0.0;
  double bias_ = 0.0;
  double integral_ = 0.0;
  double d_state_ = 0.0;
  double prev_error_ = 0.0;
  bool first_ = true;
  bool saturated_ = false;
  double travel_ = 0.0;
};

}  // namespace hydroflex::control
