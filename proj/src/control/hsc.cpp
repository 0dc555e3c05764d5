#include "hydroflex/control/hsc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hydroflex/errors.hpp"

namespace hydroflex::control {

std::vector<double> hsc_dispatch(double dp, const std::vector<HscUnit>& units) {
  bool pump = false, turbine = false;
  for (const auto& u : units) {
    pump = pump || u.mode == unit::Mode::Pump;
    turbine = turbine || u.mode == unit::Mode::Turbine;
  }
  if (!pump || !turbine) throw InfeasibleError("hydraulic short circuit needs a pumping and a generating unit");
  std::vector<double> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(u.setpoint_mw);
  if (dp == 0.0) return out;

  double room = 0.0;
  for (const auto& u : units) room += dp > 0.0 ? u.headroom_up() : u.headroom_down();
  if (std::abs(dp) > room * (1.0 + 1e-12) + 1e-9) {
    throw InfeasibleError("HSC command " + std::to_string(dp) + " MW outside combined range " + std::to_string(room) +
                          " MW");
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    const double h = dp > 0.0 ? units[i].headroom_up() : units[i].headroom_down();
    if (room > 0.0) out[i] += std::clamp(dp, -room, room) * h / room;
  }
  return out;
}

double hsc_unit_band(const HscUnit& u) { return std::max(0.0, std::min(u.headroom_up(), u.headroom_down())); }

double hsc_plant_band(const std::vector<HscUnit>& units) {
  double s = 0.0;
  for (const auto& u : units) s += hsc_unit_band(u);
  return s;
}

}  // namespace hydroflex::control
