#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hydroflex/control/governor.hpp"
#include "hydroflex/control/hbh.hpp"
#include "hydroflex/control/reserves.hpp"
#include "hydroflex/hydraulic/network.hpp"
#include "hydroflex/matrix/matrix.hpp"
#include "hydroflex/qualification/envelopes.hpp"
#include "hydroflex/unit/bess.hpp"
#include "hydroflex/unit/characteristic.hpp"
#include "hydroflex/unit/unit.hpp"

namespace hydroflex::plant {

/// Controller settings for one speed technology.
struct ControlConfig {
  control::GovernorParams power_governor;  // grid-connected fixed speed, power/droop mode
  control::GovernorParams speed_governor;  // variable speed, and islanded operation
  std::optional<control::GovernorParams> island_governor;  // islanded operation, speed_governor if absent
  double permanent_droop = 0.0085;         // Bs, turbine
  double pump_permanent_droop = 0.035;     // Bs, variable-speed pump
  double fcr_deadband_hz = 0.0;
  double fcr_ramp_mw_s = 0.0;              // converter setpoint rate limit for FCR, 0 for none
  double afrr_ramp_limit_mw_s = 0.0;       // converter setpoint rate limit for aFRR, 0 for none
  double rocof_window_s = 0.1;
  double ffr_ramp_s = 1.0;                 // command ramp time inside the allowed activation time
  double ffr_deactivation_mw_s = 0.0;      // 0: stepwise return after the support duration
  double switch_hysteresis = 0.01;
  double switch_gain_pu = 20.0;
  double switch_horizon_s = 0.5;
  double pump_opening = 1.0;
  double speed_power_feedforward = 0.0;    // opening per pu power demand, variable speed
};

struct QualificationConfig {
  qualification::FcrLimits fcr;
  qualification::AfrrLimits afrr;
  qualification::FfrLimits ffr;
  double fcr_step_hz = 0.2;
  double fcr_settle_s = 5.0;
  double afrr_ramp_s = 300.0;
  double ffr_step_hz = 49.5;
  double ffr_observe_s = 60.0;
  double ffr_pump_observe_s = 60.0;
  double black_start_frequency_floor_hz = 49.0;
  double black_start_observe_s = 60.0;
  double search_resolution_pu = 0.005;
  double inertia_rocof_hz_s = 1.0;
  double inertia_ramp_s = 1.0;
  double inertia_tolerance = 0.10;
  std::vector<double> black_start_speeds_rpm;  // variable-speed initial speeds to sweep
};

struct MachineBase {
  std::string characteristic;  // CSV path relative to the config, or "synthetic"
  unit::RatedBase base;
  double specific_speed = 0.0;
};

struct PlantConfig {
  std::string name;
  std::string demonstrator;
  std::string source_path;
  hydraulic::NetworkSpec network;
  hydraulic::SolverSettings solver;
  std::string upper_reservoir;
  std::string lower_reservoir;
  double lower_elevation_m = 0.0;
  MachineBase machine;
  std::vector<unit::UnitConfig> units;
  ControlConfig fixed_control;
  ControlConfig variable_control;
  std::optional<unit::Bess> bess;
  control::HbhJointControl hbh;
  QualificationConfig qualification;
  matrix::ScoringConfig scoring;
  std::vector<std::string> stacks;

  const ControlConfig& control_for(unit::Technology t) const {
    return t == unit::Technology::Fixed ? fixed_control : variable_control;
  }
};

/// Parses a YAML plant description. Throws ConfigError with the offending line.
PlantConfig load_plant_config(const std::string& path);
PlantConfig parse_plant_config(const std::string& text, const std::string& origin = "<string>");

/// Full schema and invariant check without simulation.
std::vector<std::string> validate_plant_config(const std::string& path);
std::vector<std::string> validate_plant_config(const PlantConfig& cfg);

/// Loads the characteristic named by the config.
std::shared_ptr<const unit::Characteristic> load_characteristic(const PlantConfig& cfg);

}  // namespace hydroflex::plant
