#pragma once

#include <map>
#include <string>
#include <vector>

namespace hydroflex::qualification {

struct FcrLimits {
  double e_v = 0.05;                       // hold tolerance, pu of Rp
  double initial_response_fraction = 0.05; // |dP| that counts as a response, pu of Rp
  double t_i_max_s = 2.0;
  double t_r_max_s = 30.0;
  double reach_tolerance = 0.01;           // Rp counts as reached at (1 - tol) Rp
  double hold_s = 120.0;
};

struct AfrrLimits {
  double e_v = 0.05;  // pu of PR
  double t_b_s = 30.0;
  double t_i_max_s = 2.0;
  double t_end_s = 400.0;
  double filter_time_constant_s = 20.0;
};

struct FfrLimits {
  double activation_level_hz = 49.7;
  double full_activation_max_s = 1.3;
  double support_min_s = 30.0;
  double over_delivery_max = 0.20;
  double cycle_max_s = 900.0;
  double reach_tolerance = 0.01;
  double return_fraction = 0.05;  // delivery counts as ended below this share of capacity
};

std::vector<std::string> validate(const FcrLimits& l);
std::vector<std::string> validate(const AfrrLimits& l);
std::vector<std::string> validate(const FfrLimits& l);

struct Violation {
  double time_s = 0.0;
  std::string quantity;
  double value = 0.0;
  double bound = 0.0;
};

struct ComplianceReport {
  std::string service;
  std::string stack;
  std::string mode;
  bool pass = false;
  double capability_mw = 0.0;
  std::vector<Violation> violations;
  std::string trace_file;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;

  void add(Violation v) {
    violations.push_back(std::move(v));
    pass = false;
  }
  void finalize() { pass = violations.empty(); }
};

/// t starts at the activation instant; dp is the response in the requested
/// direction (positive when correct). Throws ConfigError when the trace ends
/// before t_r_max + hold.
ComplianceReport check_fcr_envelope(const std::vector<double>& t, const std::vector<double>& dp, double rp_mw,
                                    const FcrLimits& limits);

/// Band = filtered raw setpoint +- e_v PR from T_i to T.
ComplianceReport check_afrr_envelope(const std::vector<double>& t, const std::vector<double>& p,
                                     const std::vector<double>& raw_setpoint, double pr_mw,
                                     const AfrrLimits& limits);

/// t starts at activation; dp is the delivered extra power.
ComplianceReport check_ffr_envelope(const std::vector<double>& t, const std::vector<double>& dp,
                                    double capacity_mw, const FfrLimits& limits);

}  // namespace hydroflex::qualification
