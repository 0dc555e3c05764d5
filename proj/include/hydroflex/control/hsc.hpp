#pragma once

#include <vector>

#include "hydroflex/unit/unit.hpp"

namespace hydroflex::control {

/// One unit on the shared waterway. Powers in generator convention: turbine
/// output positive, pump input negative.
struct HscUnit {
  unit::Technology technology = unit::Technology::Fixed;
  unit::Mode mode = unit::Mode::Turbine;
  double min_mw = 0.0;
  double max_mw = 0.0;
  double setpoint_mw = 0.0;

  /// Fixed-speed pumps cannot modulate their input power.
  bool modulating() const {
    return !(mode == unit::Mode::Pump && technology == unit::Technology::Fixed);
  }
  double headroom_up() const { return modulating() ? max_mw - setpoint_mw : 0.0; }
  double headroom_down() const { return modulating() ? setpoint_mw - min_mw : 0.0; }
};

/// Splits a plant modulation [MW] across the units in proportion to their
/// headroom in the requested direction. Throws InfeasibleError outside the
/// combined range or without a pump and a turbine.
std::vector<double> hsc_dispatch(double plant_modulation_mw, const std::vector<HscUnit>& units);

/// Symmetric band of each unit around its setpoint, min(up, down) headroom.
double hsc_unit_band(const HscUnit& u);
/// Plant band as the sum of the unit bands.
double hsc_plant_band(const std::vector<HscUnit>& units);

}  // namespace hydroflex::control
