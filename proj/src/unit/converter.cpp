#include "hydroflex/unit/converter.hpp"

#include <algorithm>
#include <cmath>

#include "hydroflex/errors.hpp"
#include "hydroflex/unit/unit.hpp"

namespace hydroflex::unit {

Converter::Converter(double lag_s, double rating_mw, double initial_mw)
    : lag_s_(lag_s), rating_mw_(rating_mw), p_mw_(initial_mw) {
  if (lag_s < 0.0) throw ConfigError("converter lag must be non-negative");
  if (!(rating_mw > 0.0)) throw ConfigError("converter rating must be positive");
}

double Converter::step(double setpoint_mw, double dt, double time_s) {
  if (std::abs(setpoint_mw) > rating_mw_ * (1.0 + 1e-9)) {
    throw SimulationError("converter rating exceeded: setpoint " + std::to_string(setpoint_mw) + " MW, rating " +
                              std::to_string(rating_mw_) + " MW",
                          time_s);
  }
  const double a = lag_s_ > 0.0 ? std::exp(-dt / lag_s_) : 0.0;
  p_mw_ = setpoint_mw + (p_mw_ - setpoint_mw) * a;
  return p_mw_;
}

StrategySwitch::StrategySwitch(double lower_rpm, double upper_rpm, double hysteresis_frac, double gain_pu,
                               double rated_mw, double sync_rpm)
    : lower_(lower_rpm), upper_(upper_rpm), hyst_(hysteresis_frac), gain_(gain_pu), rated_(rated_mw),
      sync_(sync_rpm) {}

double StrategySwitch::update(double n_rpm, double dn_dt_rpm_s, double horizon_s) {
  const double predicted = n_rpm + dn_dt_rpm_s * horizon_s;
  const double band = hyst_ * sync_;
  if (active_ == 0) {
    if (predicted > upper_ + band) {
      active_ = 1;
      ++activations_;
    } else if (predicted < lower_ - band) {
      active_ = -1;
      ++activations_;
    }
  } else if (active_ > 0 && n_rpm < upper_ && predicted < upper_) {
    active_ = 0;
  } else if (active_ < 0 && n_rpm > lower_ && predicted > lower_) {
    active_ = 0;
  }
  if (active_ > 0) return gain_ * rated_ * std::max(0.0, predicted - upper_) / sync_;
  if (active_ < 0) return -gain_ * rated_ * std::max(0.0, lower_ - predicted) / sync_;
  return 0.0;
}

void check_stall(const UnitConfig& cfg, double n_rpm, double time_s) {
  if (cfg.technology != Technology::Fsfc) return;
  const double stall = cfg.stall_fraction * cfg.synchronous_speed_rpm;
  if (n_rpm < stall) {
    throw SimulationError("unit '" + cfg.id + "' stalled at " + std::to_string(n_rpm) + " rpm (threshold " +
                              std::to_string(stall) + " rpm)",
                          time_s);
  }
}

}  // namespace hydroflex::unit
