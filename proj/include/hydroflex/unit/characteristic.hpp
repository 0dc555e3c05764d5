#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hydroflex/hydraulic/network.hpp"

namespace hydroflex::unit {

/// Interpolated operating point in per unit with partial derivatives.
struct OperatingPoint {
  double q = 0.0;
  double t = 0.0;
  double dq_dn = 0.0, dq_dh = 0.0, dq_dy = 0.0;
  double dt_dn = 0.0, dt_dh = 0.0, dt_dy = 0.0;
  bool extrapolated = false;
};

/// Quasi-static machine characteristic tabulated on a rectilinear (n, h, y)
/// grid in per unit. Negative n is the pump quadrant of a reversible machine.
class Characteristic {
 public:
  Characteristic() = default;
  /// Values are stored with y varying fastest, then h, then n.
  Characteristic(std::vector<double> n_axis, std::vector<double> h_axis, std::vector<double> y_axis,
                 std::vector<double> q, std::vector<double> t);

  static Characteristic load_csv(const std::string& path);
  static Characteristic read_csv(std::istream& in, const std::string& origin = "<stream>");
  void write_csv(std::ostream& out) const;

  OperatingPoint evaluate(double n, double h, double y) const;

  const std::vector<double>& n_axis() const { return n_; }
  const std::vector<double>& h_axis() const { return h_; }
  const std::vector<double>& y_axis() const { return y_; }
  double q_at(std::size_t i, std::size_t j, std::size_t k) const { return q_[index(i, j, k)]; }
  double t_at(std::size_t i, std::size_t j, std::size_t k) const { return t_[index(i, j, k)]; }

  /// 4 when the table covers negative speed (reversible pump-turbine), else 2.
  int quadrants() const { return !n_.empty() && n_.front() < 0.0 ? 4 : 2; }
  bool empty() const { return q_.empty(); }

  /// True when q is non-decreasing in y at every (n >= 0, h) node.
  bool monotone_in_opening() const;

 private:
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * h_.size() + j) * y_.size() + k;
  }

  std::vector<double> n_, h_, y_;
  std::vector<double> q_, t_;
};

/// Analytic reversible Francis shape used to generate the shipped table.
OperatingPoint synthetic_pump_turbine_point(double n, double h, double y);

/// Synthetic 4-quadrant table sampled from synthetic_pump_turbine_point.
Characteristic synthetic_pump_turbine();

struct RatedBase {
  double speed_rpm = 0.0;
  double head_m = 0.0;
  double discharge_m3s = 0.0;
  double power_w = 0.0;

  double omega_rad_s() const;
  double torque_nm() const { return power_w / omega_rad_s(); }
};

/// Adapts a per-unit characteristic to the SI machine boundary of the
/// hydraulic network.
class PhysicalMachine : public hydraulic::MachineModel {
 public:
  PhysicalMachine(const Characteristic* table, RatedBase base) : table_(table), base_(base) {}

  hydraulic::MachineResponse evaluate(double omega_rad_s, double head_m, double opening) const override;
  OperatingPoint evaluate_pu(double omega_rad_s, double head_m, double opening) const;

  const RatedBase& base() const { return base_; }
  const Characteristic& table() const { return *table_; }

 private:
  const Characteristic* table_;
  RatedBase base_;
};

}  // namespace hydroflex::unit
