#pragma once

namespace hydroflex::unit {

struct UnitConfig;

/// Power-controlled frequency converter: first-order lag from setpoint to
/// electrical power, discretised exactly.
class Converter {
 public:
  Converter(double lag_s, double rating_mw, double initial_mw = 0.0);

  /// Advances one step. Throws SimulationError if the setpoint exceeds the rating.
  double step(double setpoint_mw, double dt, double time_s = 0.0);
  double power_mw() const { return p_mw_; }
  void reset(double p_mw) { p_mw_ = p_mw; }
  double rating_mw() const { return rating_mw_; }

 private:
  double lag_s_;
  double rating_mw_;
  double p_mw_;
};

/// Supervisory switch from converter power control to speed control when the
/// predicted speed leaves the window by more than the hysteresis band. While
/// active the converter power is corrected to pull the speed back to the
/// window edge; it releases once speed and prediction are inside again.
class StrategySwitch {
 public:
  StrategySwitch(double lower_rpm, double upper_rpm, double hysteresis_frac = 0.01, double gain_pu = 20.0,
                 double rated_mw = 1.0, double sync_rpm = 1.0);

  /// Updates the flag from the current speed and its rate of change over the
  /// prediction horizon; returns the power correction [MW] to add.
  double update(double n_rpm, double dn_dt_rpm_s, double horizon_s = 0.5);
  bool active() const { return active_ != 0; }
  /// +1 overspeed, -1 underspeed, 0 inactive.
  int direction() const { return active_; }
  int activations() const { return activations_; }

 private:
  double lower_, upper_, hyst_, gain_, rated_, sync_;
  int active_ = 0;
  int activations_ = 0;
};

/// FSFC stall check: throws SimulationError below stall_fraction * n_sync.
void check_stall(const UnitConfig& cfg, double n_rpm, double time_s);

}  // namespace hydroflex::unit
