#pragma once

#include <optional>
#include <string>
#include <vector>

namespace hydroflex::unit {

enum class Technology { Fixed, Dfim, Fsfc };

const char* to_string(Technology t);
Technology technology_from_string(const std::string& s);
inline bool variable_speed(Technology t) { return t != Technology::Fixed; }

enum class Mode { Turbine, Pump, SpeedNoLoad, Condenser };

const char* to_string(Mode m);

struct PowerRange {
  double min_mw = 0.0;
  double max_mw = 0.0;

  double span() const { return max_mw - min_mw; }
  double mid() const { return 0.5 * (min_mw + max_mw); }
  bool contains(double p) const { return p >= min_mw - 1e-9 && p <= max_mw + 1e-9; }
};

struct SpeedRange {
  double min_rpm = 0.0;
  double middle_rpm = 0.0;
  double max_rpm = 0.0;
};

struct UnitConfig {
  std::string id;
  std::string machine_node;
  Technology technology = Technology::Fixed;
  double rated_power_mw = 0.0;
  double rated_apparent_power_mva = 0.0;
  double tau_m_s = 0.0;
  double synchronous_speed_rpm = 0.0;
  double nominal_frequency_hz = 50.0;
  SpeedRange speed_range;
  double head_min_m = 0.0;
  double head_max_m = 0.0;
  PowerRange turbine_range;
  // Pump input power as positive magnitudes.
  std::optional<PowerRange> pump_range;
  std::optional<PowerRange> pump_range_alternative;
  std::optional<PowerRange> spps_extended_range;
  bool grid_forming_capable = false;
  double specific_speed = 0.0;

  double transient_speed_margin = 0.02;
  double stall_fraction = 0.5;
  double converter_lag_s = 0.1;
  double converter_rating_mw = 0.0;  // 0: rated apparent power

  bool reversible() const { return pump_range.has_value(); }
  double omega_sync_rad_s() const;
  /// J from tau_m with the rated power as base.
  double inertia_kgm2() const;
  /// Steady-state speed window; collapses to synchronous speed for fixed units.
  SpeedRange steady_speed_window() const;
  /// Lower/upper transient speed limits (stall threshold for FSFC).
  double transient_min_rpm() const;
  double transient_max_rpm() const;
  PowerRange turbine_range_with(bool spps) const;
  double converter_rating() const {
    return converter_rating_mw > 0.0 ? converter_rating_mw : rated_apparent_power_mva;
  }

  /// Schema/invariant diagnostics, empty when valid.
  std::vector<std::string> validate() const;
};

struct UnitState {
  double n_rpm = 0.0;
  double y = 0.0;
  double head_m = 0.0;
  double discharge_m3s = 0.0;
  double torque_nm = 0.0;
  double p_elec_mw = 0.0;
  Mode mode = Mode::Turbine;
};

/// J = tau_m S / omega_n^2.
double rotor_inertia(double tau_m_s, double rated_apparent_power_va, double synchronous_speed_rpm);
double kinetic_energy_j(double inertia, double omega_rad_s);

/// Trapezoidal swing equation: omega' = omega + dt (T_mech - T_elec) / J with
/// both torques taken as their step averages, so a constant net torque gives
/// exactly dT dt / J.
double swing_step(double omega_rad_s, double t_mech_avg_nm, double t_elec_avg_nm, double inertia, double dt);

/// Work of the net torque over one step, using step-average torque and speed;
/// with swing_step it matches the kinetic-energy change exactly.
double swing_work_j(double omega0, double omega1, double net_torque_avg_nm, double dt);

/// Grid-locked fixed-speed unit: n / n_sync = f / f_n.
double locked_speed_rpm(const UnitConfig& cfg, double grid_frequency_hz);

double rpm_to_rad_s(double rpm);
double rad_s_to_rpm(double omega);

}  // namespace hydroflex::unit
