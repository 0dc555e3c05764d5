#pragma once

#include <vector>

namespace hydroflex::control {

// ---------------------------------------------------------------------------
// FCR
// ---------------------------------------------------------------------------

struct FcrController {
  double permanent_droop = 0.0085;  // Bs
  double deadband_hz = 0.0;
  double reserve_mw = 0.0;  // Rp
  double nominal_frequency_hz = 50.0;
  double power_base_mw = 0.0;
};

/// dP = -(f - f_n)/(Bs f_n) P_base outside the deadband, clamped to +-Rp.
double fcr_command(const FcrController& ctrl, double f_meas_hz);

// ---------------------------------------------------------------------------
// aFRR
// ---------------------------------------------------------------------------

struct AfrrController {
  double reserve_band_mw = 0.0;  // PR
  double filter_time_constant_s = 20.0;
  double ramp_duration_s = 300.0;
};

/// First-order lag for inputs that vary linearly between samples:
/// y[k+1] = a y[k] + b0 u[k+1] + b1 u[k], a = exp(-dt/T),
/// b0 = 1 - T(1 - a)/dt, b1 = T(1 - a)/dt - a.
class FirstOrderHoldFilter {
 public:
  FirstOrderHoldFilter(double time_constant_s, double dt, double initial);
  double step(double u_next);
  double value() const { return y_; }

 private:
  double a_, b0_, b1_;
  double y_, u_;
};

/// Raw loading setpoint: from p_start, moving 2 PR over the ramp duration.
double afrr_raw_setpoint(const AfrrController& ctrl, double p_start_mw, double direction, double t_s);

/// Filtered setpoint P_tot for a raw trace sampled at dt, starting in steady state.
std::vector<double> afrr_filtered_setpoint(const AfrrController& ctrl, const std::vector<double>& raw, double dt);

// ---------------------------------------------------------------------------
// Inertia emulation
// ---------------------------------------------------------------------------

/// x[k+1] = a x[k] + (1 - a)(f[k+1] - f[k])/dt, a = exp(-dt/window).
class RocofEstimator {
 public:
  RocofEstimator(double window_s, double dt, double f0_hz);
  double step(double f_hz);
  double value() const { return x_; }

 private:
  double a_, dt_, f_prev_, x_ = 0.0;
};

/// dP = -tau_m P_base (df/dt) / f_n.
double inertia_emulation(double rocof_hz_s, double tau_m_s, double power_base_mw, double nominal_frequency_hz);

// ---------------------------------------------------------------------------
// FFR
// ---------------------------------------------------------------------------

enum class FfrSupport { Short, Long };

struct FfrParams {
  double activation_level_hz = 49.7;
  double full_activation_s = 1.3;
  double capacity_mw = 0.0;
  FfrSupport support = FfrSupport::Long;
  double deactivation_rate_mw_s = 0.0;  // 0: stepwise
  double recovery_s = 900.0;
  double hold_margin_s = 0.5;  // extra hold after the ramp to cover the delivery lag

  double support_s() const { return support == FfrSupport::Short ? 5.0 : 30.0; }
};

/// Maximum full-activation time allowed for a standard activation level.
double ffr_activation_time_for_level(double level_hz);

class FfrController {
 public:
  enum class Phase { Idle, Ramping, Holding, Deactivating, Recovering };

  explicit FfrController(FfrParams params);

  /// Power command at time t for the measured frequency.
  double step(double t_s, double f_hz);
  Phase phase() const { return phase_; }
  int activations() const { return activations_; }
  int rejected_triggers() const { return rejected_; }
  double command() const { return command_; }
  const FfrParams& params() const { return p_; }

 private:
  FfrParams p_;
  Phase phase_ = Phase::Idle;
  double t_start_ = 0.0;
  double t_release_ = 0.0;
  double ready_at_ = -1e300;
  double command_ = 0.0;
  bool below_ = false;
  int activations_ = 0;
  int rejected_ = 0;
};

}  // namespace hydroflex::control
