#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hydroflex/control/reserves.hpp"
#include "hydroflex/plant/config.hpp"
#include "hydroflex/plant/stack.hpp"

namespace hydroflex::plant {

using TimeFunction = std::function<double(double)>;

/// What one unit does during a scenario. Powers in generator convention:
/// pump input is negative.
struct UnitProgram {
  bool online = false;
  unit::Mode mode = unit::Mode::Turbine;
  double p0_mw = 0.0;  // pumps: 0 holds n0 and the pump opening instead
  double n0_rpm = 0.0;  // 0: middle speed for variable speed, synchronous for fixed speed

  /// Islanded on its own resistive load instead of the grid. Variable-speed
  /// units then form the grid at nominal frequency.
  bool islanded = false;
  TimeFunction load_mw;

  /// Setpoint offset added to p0 (aFRR, HSC dispatch).
  TimeFunction offset_mw;
  std::optional<control::FcrController> fcr;
  std::optional<control::FfrParams> ffr;
  bool inertia_emulation = false;
  bool strategy_switch = true;
};

struct Scenario {
  double head_m = 0.0;  // gross head between the reservoirs
  double duration_s = 0.0;
  TimeFunction frequency_hz;  // grid frequency, nominal when empty
  TimeFunction measured_hz;   // frequency seen by the controllers, grid frequency when empty
  std::vector<UnitProgram> units;  // indexed like PlantConfig::units
};

/// Speeds are magnitudes; pumps turn backwards in the machine characteristic.
struct UnitTrace {
  std::string id;
  std::vector<double> n_rpm, p_mw, p_mech_mw, q_m3s, h_m, y, command_mw;
  int switch_activations = 0;
  double travel = 0.0;
  double n_min_rpm = 0.0;
  double n_max_rpm = 0.0;
};

struct Trace {
  std::vector<double> t;
  std::vector<double> f_hz;
  std::vector<UnitTrace> units;
  std::vector<double> bess_mw, bess_soc;
  /// Plant output: units plus battery.
  std::vector<double> plant_mw;

  std::size_t size() const { return t.size(); }
  /// Writes one row every `every` samples.
  void write_csv(std::ostream& out, std::size_t every = 1) const;
};

/// Waterway, units and controllers of one plant under one technology stack.
class PlantSimulator {
 public:
  PlantSimulator(const PlantConfig& cfg, TechnologyStack stack,
                 std::shared_ptr<const unit::Characteristic> table = nullptr);

  /// Runs a scenario from steady state. Throws SimulationError on aborts and
  /// InfeasibleError when the initial operating point does not exist.
  Trace run(const Scenario& sc) const;

  const PlantConfig& config() const { return cfg_; }
  const TechnologyStack& stack() const { return stack_; }
  /// Unit configuration after applying the stack technology.
  const unit::UnitConfig& unit(std::size_t i) const { return units_[i]; }
  std::size_t unit_count() const { return units_.size(); }
  double dt() const { return cfg_.solver.dt_s; }
  double head_min() const;
  double head_max() const;
  /// Turbine range including the SPPS extension when the stack has it.
  unit::PowerRange turbine_range(std::size_t i) const;
  const ControlConfig& control() const { return cfg_.control_for(stack_.technology); }

 private:
  PlantConfig cfg_;
  TechnologyStack stack_;
  std::vector<unit::UnitConfig> units_;
  std::shared_ptr<const unit::Characteristic> table_;
};

}  // namespace hydroflex::plant
