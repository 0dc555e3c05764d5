#include "hydroflex/unit/bess.hpp"

#include <algorithm>
#include <cmath>

namespace hydroflex::unit {

BessStep bess_step(Bess& bess, double command_mw, double dt) {
  BessStep out;
  const double energy_j = bess.energy_capacity_mwh * 3600.0;  // MW s
  const double cmd = std::clamp(command_mw, -bess.rated_power_mw, bess.rated_power_mw);
  out.saturated = cmd != command_mw;
  const double a = bess.response_time_constant_s > 0.0 ? std::exp(-dt / bess.response_time_constant_s) : 0.0;
  double p = cmd + (bess.power_mw - cmd) * a;
  // Energy available this step in either direction.
  const double max_discharge = energy_j > 0.0 ? bess.soc * energy_j / dt : 0.0;
  const double max_charge = energy_j > 0.0 ? (1.0 - bess.soc) * energy_j / dt : 0.0;
  const double limited = std::clamp(p, -max_charge, max_discharge);
  if (limited != p) out.saturated = true;
  p = limited;
  bess.power_mw = p;
  if (energy_j > 0.0) bess.soc = std::clamp(bess.soc - p * dt / energy_j, 0.0, 1.0);
  out.power_mw = p;
  out.soc = bess.soc;
  return out;
}

}  // namespace hydroflex::unit
