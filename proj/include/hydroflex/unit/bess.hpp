#pragma once

namespace hydroflex::unit {

struct Bess {
  double rated_power_mw = 0.0;
  double energy_capacity_mwh = 0.0;
  double soc = 0.5;
  double response_time_constant_s = 0.0;
  double power_mw = 0.0;  // delivered, discharge positive
};

struct BessStep {
  double power_mw = 0.0;
  double soc = 0.0;
  bool saturated = false;
};

/// Lag, rating clamp and SOC limits; soc' = soc - P dt / E.
BessStep bess_step(Bess& bess, double command_mw, double dt);

}  // namespace hydroflex::unit
