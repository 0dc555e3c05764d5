#include "hydroflex/qualification/envelopes.hpp"

#include <algorithm>
#include <cmath>

#include "hydroflex/control/reserves.hpp"
#include "hydroflex/errors.hpp"

namespace hydroflex::qualification {

namespace {

constexpr double kRel = 1e-9;

void check_shapes(const std::vector<double>& t, const std::vector<double>& x) {
  if (t.size() != x.size() || t.size() < 2) throw ConfigError("malformed trace");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k] > t[k - 1])) throw ConfigError("trace time must be strictly increasing");
  }
}

}  // namespace

std::vector<std::string> validate(const FcrLimits& l) {
  std::vector<std::string> d;
  if (!(l.e_v > 0.0 && l.e_v < 1.0)) d.push_back("fcr: e_v outside (0, 1)");
  if (!(l.initial_response_fraction > 0.0 && l.initial_response_fraction < 1.0)) {
    d.push_back("fcr: initial_response_fraction outside (0, 1)");
  }
  if (!(l.t_i_max_s < l.t_r_max_s)) d.push_back("fcr: t_i_max must be below t_r_max");
  if (!(l.hold_s > 0.0)) d.push_back("fcr: hold must be positive");
  if (!(l.reach_tolerance >= 0.0 && l.reach_tolerance < 1.0)) d.push_back("fcr: reach_tolerance outside [0, 1)");
  return d;
}

std::vector<std::string> validate(const AfrrLimits& l) {
  std::vector<std::string> d;
  if (!(l.e_v > 0.0 && l.e_v < 1.0)) d.push_back("afrr: e_v outside (0, 1)");
  if (!(l.filter_time_constant_s > 0.0)) d.push_back("afrr: filter constant must be positive");
  if (!(l.t_i_max_s >= 0.0 && l.t_i_max_s < l.t_end_s)) d.push_back("afrr: T_i must lie before T");
  if (!(l.t_b_s >= 0.0)) d.push_back("afrr: T_b must be non-negative");
  return d;
}

std::vector<std::string> validate(const FfrLimits& l) {
  std::vector<std::string> d;
  if (!(l.full_activation_max_s > 0.0)) d.push_back("ffr: full activation time must be positive");
  if (!(l.support_min_s > 0.0)) d.push_back("ffr: support duration must be positive");
  if (!(l.over_delivery_max >= 0.0)) d.push_back("ffr: over-delivery limit must be non-negative");
  if (!(l.cycle_max_s > l.full_activation_max_s + l.support_min_s)) d.push_back("ffr: cycle too short");
  return d;
}

ComplianceReport check_fcr_envelope(const std::vector<double>& t, const std::vector<double>& dp, double rp,
                                    const FcrLimits& l) {
  check_shapes(t, dp);
  if (!(rp > 0.0)) throw ConfigError("FCR envelope needs a positive reserve");
  const double t0 = t.front();
  if (t.back() - t0 < l.t_r_max_s + l.hold_s - 1e-9) {
    throw ConfigError("FCR trace shorter than t_r_max + hold window");
  }
  ComplianceReport r;
  r.service = "FCR";

  double t_i = -1.0, t_r = -1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t_i < 0.0 && std::abs(dp[k]) > l.initial_response_fraction * rp) t_i = t[k] - t0;
    if (t_r < 0.0 && dp[k] >= rp * (1.0 - l.reach_tolerance) * (1.0 - kRel)) t_r = t[k] - t0;
  }
  r.metrics["t_i_s"] = t_i;
  r.metrics["t_r_s"] = t_r;
  if (t_i < 0.0 || t_i > l.t_i_max_s + kRel) {
    r.add({l.t_i_max_s, "t_i", t_i, l.t_i_max_s});
  }
  if (t_r < 0.0 || t_r > l.t_r_max_s + kRel) {
    r.add({l.t_r_max_s, "t_r", t_r, l.t_r_max_s});
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] - t0 < l.t_r_max_s - kRel) continue;
    const double dev = std::abs(dp[k] - rp);
    worst = std::max(worst, dev);
    if (dev > l.e_v * rp * (1.0 + kRel) + 1e-12) {
      r.add({t[k] - t0, "hold", dp[k], l.e_v * rp});
      break;
    }
  }
  r.metrics["hold_max_deviation_mw"] = worst;
  r.finalize();
  return r;
}

ComplianceReport check_afrr_envelope(const std::vector<double>& t, const std::vector<double>& p,
                                     const std::vector<double>& raw, double pr, const AfrrLimits& l) {
  check_shapes(t, p);
  if (raw.size() != p.size()) throw ConfigError("aFRR setpoint and power traces differ in length");
  if (!(pr > 0.0)) throw ConfigError("aFRR envelope needs a positive reserve band");
  const double t0 = t.front();
  if (t.back() - t0 < l.t_end_s - 1e-9) throw ConfigError("aFRR trace shorter than T");
  const double dt = t[1] - t[0];
  const auto centre =
      control::afrr_filtered_setpoint({0.0, l.filter_time_constant_s, 0.0}, raw, dt);
  ComplianceReport r;
  r.service = "aFRR";
  double worst = 0.0;
  bool violated = false;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double tk = t[k] - t0;
    if (tk < l.t_i_max_s - kRel || tk > l.t_end_s + kRel) continue;
    const double dev = std::abs(p[k] - centre[k]);
    worst = std::max(worst, dev);
    if (!violated && dev > l.e_v * pr * (1.0 + kRel) + 1e-12) {
      r.add({tk, "band", p[k] - centre[k], l.e_v * pr});
      violated = true;
    }
  }
  r.metrics["max_deviation_mw"] = worst;
  r.metrics["max_deviation_pu_of_pr"] = worst / pr;
  r.finalize();
  return r;
}

ComplianceReport check_ffr_envelope(const std::vector<double>& t, const std::vector<double>& dp, double cap,
                                    const FfrLimits& l) {
  check_shapes(t, dp);
  if (!(cap > 0.0)) throw ConfigError("FFR envelope needs a positive capacity");
  const double t0 = t.front();
  ComplianceReport r;
  r.service = "FFR";

  double t_full = -1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (dp[k] >= cap * (1.0 - l.reach_tolerance) * (1.0 - kRel)) {
      t_full = t[k] - t0;
      break;
    }
  }
  r.metrics["t_full_s"] = t_full;
  if (t_full < 0.0 || t_full > l.full_activation_max_s + kRel) {
    r.add({l.full_activation_max_s, "full_activation", t_full, l.full_activation_max_s});
  }

  // Support: from full activation (or the limit when late) for support_min.
  const double s0 = t_full >= 0.0 ? t_full : l.full_activation_max_s;
  if (t.back() - t0 < s0 + l.support_min_s - 1e-9) throw ConfigError("FFR trace shorter than support window");
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double tk = t[k] - t0;
    if (tk < s0 - kRel || tk > s0 + l.support_min_s + kRel) continue;
    if (dp[k] < cap * (1.0 - l.reach_tolerance) * (1.0 - kRel)) {
      r.add({tk, "support", dp[k], cap * (1.0 - l.reach_tolerance)});
      break;
    }
  }

  const double peak = *std::max_element(dp.begin(), dp.end());
  r.metrics["peak_mw"] = peak;
  r.metrics["over_delivery_pu"] = peak / cap - 1.0;
  if (peak > cap * (1.0 + l.over_delivery_max) * (1.0 + kRel)) {
    const auto k = std::max_element(dp.begin(), dp.end()) - dp.begin();
    r.add({t[k] - t0, "over_delivery", peak, cap * (1.0 + l.over_delivery_max)});
  }

  double t_end = -1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double tk = t[k] - t0;
    if (tk > s0 + l.support_min_s && std::abs(dp[k]) <= l.return_fraction * cap) {
      t_end = tk;
      break;
    }
  }
  r.metrics["cycle_s"] = t_end;
  if (t_end < 0.0 || t_end > l.cycle_max_s + kRel) {
    r.add({t_end < 0.0 ? t.back() - t0 : t_end, "cycle", t_end, l.cycle_max_s});
  }
  r.finalize();
  return r;
}

}  // namespace hydroflex::qualification
