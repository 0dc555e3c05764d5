#include "hydroflex/control/hbh.hpp"

#include <algorithm>
#include <cmath>

#include "hydroflex/errors.hpp"

namespace hydroflex::control {

HbhSplitter::HbhSplitter(HbhJointControl params, double dt, double droop_mw_per_hz, double bess_rated_mw)
    : p_(params), droop_(droop_mw_per_hz), bess_rated_(bess_rated_mw) {
  if (!(p_.split_time_constant_s > 0.0)) throw ConfigError("HBH split time constant must be positive");
  a_ = std::exp(-dt / p_.split_time_constant_s);
}

HbhCommand HbhSplitter::step(double df_hz, double total, double soc, double max_dis, double max_chg) {
  df_lp_ = a_ * df_lp_ + (1.0 - a_) * df_hz;
  HbhCommand c;
  const double trend = std::abs(df_lp_) > p_.turbine_deadband_hz ? -droop_ * df_lp_ : 0.0;
  const double bias = p_.soc_gain_pu * (p_.soc_target - soc) * bess_rated_;
  c.turbine_mw = trend + bias;
  const double want = total - c.turbine_mw;
  c.bess_mw = std::clamp(want, -max_chg, max_dis);
  c.bess_saturated = c.bess_mw != want;
  c.turbine_mw = total - c.bess_mw;  // spill to the turbine
  return c;
}

}  // namespace hydroflex::control
