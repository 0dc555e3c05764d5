#pragma once

namespace hydroflex::control {

struct HbhJointControl {
  double split_time_constant_s = 30.0;
  double turbine_deadband_hz = 0.01;
  double soc_gain_pu = 0.5;  // turbine bias per unit SOC error, in BESS rated power
  double soc_target = 0.5;
};

struct HbhCommand {
  double turbine_mw = 0.0;
  double bess_mw = 0.0;
  bool bess_saturated = false;
};

/// Frequency split between turbine and battery. The turbine follows the
/// low-passed droop demand outside its deadband plus a SOC recentering bias;
/// the battery takes the remainder up to its available power.
class HbhSplitter {
 public:
  HbhSplitter(HbhJointControl params, double dt, double droop_mw_per_hz, double bess_rated_mw);

  /// total_demand_mw is the droop FCR demand for df_hz; bess limits are the
  /// power the battery can deliver (discharge, positive) or absorb this step.
  HbhCommand step(double df_hz, double total_demand_mw, double soc, double bess_max_discharge_mw,
                  double bess_max_charge_mw);

 private:
  HbhJointControl p_;
  double a_;
  double droop_;
  double bess_rated_;
  double df_lp_ = 0.0;
};

}  // namespace hydroflex::control
