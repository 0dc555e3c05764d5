#include "hydroflex/unit/unit.hpp"

#include <cmath>
#include <numbers>

#include "hydroflex/errors.hpp"

namespace hydroflex::unit {

const char* to_string(Technology t) {
  switch (t) {
    case Technology::Fixed: return "fixed";
    case Technology::Dfim: return "dfim";
    case Technology::Fsfc: return "fsfc";
  }
  return "?";
}

Technology technology_from_string(const std::string& s) {
  if (s == "fixed" || s == "FS") return Technology::Fixed;
  if (s == "dfim" || s == "DFIM") return Technology::Dfim;
  if (s == "fsfc" || s == "FSFC") return Technology::Fsfc;
  throw ConfigError("unknown technology '" + s + "' (expected fixed, dfim or fsfc)");
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Turbine: return "turbine";
    case Mode::Pump: return "pump";
    case Mode::SpeedNoLoad: return "speed-no-load";
    case Mode::Condenser: return "condenser";
  }
  return "?";
}

double rpm_to_rad_s(double rpm) { return rpm * 2.0 * std::numbers::pi / 60.0; }
double rad_s_to_rpm(double omega) { return omega * 60.0 / (2.0 * std::numbers::pi); }

double rotor_inertia(double tau_m_s, double rated_apparent_power_va, double synchronous_speed_rpm) {
  const double w = rpm_to_rad_s(synchronous_speed_rpm);
  return tau_m_s * rated_apparent_power_va / (w * w);
}

double kinetic_energy_j(double inertia, double omega_rad_s) { return 0.5 * inertia * omega_rad_s * omega_rad_s; }

double swing_step(double omega_rad_s, double t_mech_avg_nm, double t_elec_avg_nm, double inertia, double dt) {
  return omega_rad_s + dt * (t_mech_avg_nm - t_elec_avg_nm) / inertia;
}

double swing_work_j(double omega0, double omega1, double net_torque_avg_nm, double dt) {
  return net_torque_avg_nm * 0.5 * (omega0 + omega1) * dt;
}

double locked_speed_rpm(const UnitConfig& cfg, double grid_frequency_hz) {
  return cfg.synchronous_speed_rpm * grid_frequency_hz / cfg.nominal_frequency_hz;
}

double UnitConfig::omega_sync_rad_s() const { return rpm_to_rad_s(synchronous_speed_rpm); }

double UnitConfig::inertia_kgm2() const {
  return rotor_inertia(tau_m_s, rated_power_mw * 1e6, synchronous_speed_rpm);
}

SpeedRange UnitConfig::steady_speed_window() const {
  if (technology == Technology::Fixed) {
    return {synchronous_speed_rpm, synchronous_speed_rpm, synchronous_speed_rpm};
  }
  return speed_range;
}

double UnitConfig::transient_min_rpm() const {
  if (technology == Technology::Fsfc) return stall_fraction * synchronous_speed_rpm;
  return steady_speed_window().min_rpm * (1.0 - transient_speed_margin);
}

double UnitConfig::transient_max_rpm() const {
  return steady_speed_window().max_rpm * (1.0 + transient_speed_margin);
}

PowerRange UnitConfig::turbine_range_with(bool spps) const {
  return spps && spps_extended_range ? *spps_extended_range : turbine_range;
}

std::vector<std::string> UnitConfig::validate() const {
  std::vector<std::string> d;
  const std::string p = "unit '" + id + "': ";
  if (id.empty()) d.push_back("unit without id");
  if (machine_node.empty()) d.push_back(p + "machine_node is required");
  if (!(rated_power_mw > 0.0)) d.push_back(p + "rated_power_mw must be positive");
  if (!(rated_apparent_power_mva > 0.0)) d.push_back(p + "rated_apparent_power_mva must be positive");
  if (!(tau_m_s > 0.0)) d.push_back(p + "tau_m_s must be positive");
  if (!(synchronous_speed_rpm > 0.0)) d.push_back(p + "synchronous_speed_rpm must be positive");
  if (!(nominal_frequency_hz > 0.0)) d.push_back(p + "nominal_frequency_hz must be positive");
  if (technology != Technology::Fixed) {
    if (!(speed_range.min_rpm < speed_range.middle_rpm && speed_range.middle_rpm < speed_range.max_rpm)) {
      d.push_back(p + "speed range requires n_min < n_middle < n_max");
    }
    if (!(speed_range.min_rpm > 0.0)) d.push_back(p + "n_min must be positive");
  }
  if (!(head_min_m < head_max_m)) d.push_back(p + "head range requires H_min < H_max");
  if (!(turbine_range.min_mw < turbine_range.max_mw)) d.push_back(p + "turbine power range is empty");
  if (turbine_range.min_mw < 0.0) d.push_back(p + "turbine power range must be non-negative");
  if (pump_range && !(pump_range->min_mw < pump_range->max_mw)) d.push_back(p + "pump power range is empty");
  if (pump_range_alternative && !pump_range) d.push_back(p + "pump_range_alternative without pump_range");
  if (spps_extended_range) {
    if (!(spps_extended_range->min_mw < spps_extended_range->max_mw)) {
      d.push_back(p + "SPPS extended range is empty");
    } else if (spps_extended_range->min_mw > turbine_range.min_mw ||
               spps_extended_range->max_mw < turbine_range.max_mw) {
      d.push_back(p + "SPPS extended range must contain the turbine range");
    }
  }
  if (!(transient_speed_margin >= 0.0 && transient_speed_margin < 0.5)) {
    d.push_back(p + "transient_speed_margin outside [0, 0.5)");
  }
  if (!(stall_fraction > 0.0 && stall_fraction < 1.0)) d.push_back(p + "stall_fraction outside (0, 1)");
  if (!(converter_lag_s >= 0.0)) d.push_back(p + "converter_lag_s must be non-negative");
  if (rated_apparent_power_mva < turbine_range.max_mw) {
    d.push_back(p + "rated apparent power below maximum turbine power");
  }
  return d;
}

}  // namespace hydroflex::unit
