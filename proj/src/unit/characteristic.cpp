#include "hydroflex/unit/characteristic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <array>
#include <tuple>

#include "hydroflex/errors.hpp"

namespace hydroflex::unit {

namespace {

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

// Cell index and local coordinate; the coordinate leaves [0, 1] outside the hull.
std::pair<std::size_t, double> locate(const std::vector<double>& axis, double x) {
  if (axis.size() == 1) return {0, 0.0};
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t i = it == axis.begin() ? 0 : static_cast<std::size_t>(it - axis.begin()) - 1;
  i = std::min(i, axis.size() - 2);
  return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
}

// Turbine quadrant shape.
constexpr double kTurbineTorqueScale = 1.1494;
constexpr double kWindage = 0.08;
// Pump quadrant head curve h = a m^2 - b m q - c q^2 and torque scale.
constexpr double kPumpA = 2.24638704;
constexpr double kPumpB = 1.54781728;
constexpr double kPumpC = 0.23033093;
constexpr double kPumpTorqueScale = 1.0 / (0.92 * 0.95);
constexpr double kPumpFriction = 0.01;
constexpr double kPumpBlendStart = -0.5;

std::pair<double, double> turbine_shape(double n, double h, double y) {
  const double sh = std::sqrt(std::max(h, 0.0));
  const double nu = sh > 0.0 ? n / sh : 0.0;
  const double q = y * sh * (1.0 - 0.3 * (nu - 1.0));
  const double t = kTurbineTorqueScale * (q * sh * (2.0 - nu) - kWindage * n * std::abs(n));
  return {q, t};
}

std::pair<double, double> pump_shape(double n, double h, double y) {
  const double m = -n;
  const double ye = std::max(y, 0.2);
  const double c = kPumpC * (1.0 + 0.2 * (1.0 / (ye * ye) - 1.0));
  const double disc = std::max(0.0, kPumpB * kPumpB * m * m + 4.0 * c * (kPumpA * m * m - h));
  const double qp = (-kPumpB * m + std::sqrt(disc)) / (2.0 * c);
  const double t = kPumpTorqueScale * qp * (kPumpA * m - kPumpB * qp) + kPumpFriction * m * m;
  return {-qp, t};
}

}  // namespace

Characteristic::Characteristic(std::vector<double> n_axis, std::vector<double> h_axis, std::vector<double> y_axis,
                               std::vector<double> q, std::vector<double> t)
    : n_(std::move(n_axis)), h_(std::move(h_axis)), y_(std::move(y_axis)), q_(std::move(q)), t_(std::move(t)) {
  if (n_.empty() || h_.empty() || y_.empty()) throw ConfigError("characteristic: empty axis");
  if (!strictly_increasing(n_) || !strictly_increasing(h_) || !strictly_increasing(y_)) {
    throw ConfigError("characteristic: axes must be strictly increasing");
  }
  const std::size_t size = n_.size() * h_.size() * y_.size();
  if (q_.size() != size || t_.size() != size) throw ConfigError("characteristic: table size does not match axes");
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::isfinite(q_[i]) || !std::isfinite(t_[i])) throw ConfigError("characteristic: non-finite value");
  }
}

OperatingPoint Characteristic::evaluate(double n, double h, double y) const {
  if (empty()) throw ConfigError("characteristic: evaluate on empty table");
  const auto [i, u] = locate(n_, n);
  const auto [j, v] = locate(h_, h);
  const auto [k, w] = locate(y_, y);
  const std::size_t i1 = std::min(i + 1, n_.size() - 1);
  const std::size_t j1 = std::min(j + 1, h_.size() - 1);
  const std::size_t k1 = std::min(k + 1, y_.size() - 1);
  const double dn = n_.size() > 1 ? n_[i1] - n_[i] : 1.0;
  const double dh = h_.size() > 1 ? h_[j1] - h_[j] : 1.0;
  const double dy = y_.size() > 1 ? y_[k1] - y_[k] : 1.0;

  OperatingPoint p;
  p.extrapolated = u < -1e-12 || u > 1.0 + 1e-12 || v < -1e-12 || v > 1.0 + 1e-12 || w < -1e-12 || w > 1.0 + 1e-12;
  auto blend = [&](const std::vector<double>& f, double& val, double& d_n, double& d_h, double& d_y) {
    const double c000 = f[index(i, j, k)], c001 = f[index(i, j, k1)];
    const double c010 = f[index(i, j1, k)], c011 = f[index(i, j1, k1)];
    const double c100 = f[index(i1, j, k)], c101 = f[index(i1, j, k1)];
    const double c110 = f[index(i1, j1, k)], c111 = f[index(i1, j1, k1)];
    const double c00 = c000 + w * (c001 - c000), c01 = c010 + w * (c011 - c010);
    const double c10 = c100 + w * (c101 - c100), c11 = c110 + w * (c111 - c110);
    const double c0 = c00 + v * (c01 - c00), c1 = c10 + v * (c11 - c10);
    val = c0 + u * (c1 - c0);
    d_n = (c1 - c0) / dn;
    d_h = ((1 - u) * (c01 - c00) + u * (c11 - c10)) / dh;
    const double e00 = c001 - c000, e01 = c011 - c010, e10 = c101 - c100, e11 = c111 - c110;
    d_y = ((1 - u) * ((1 - v) * e00 + v * e01) + u * ((1 - v) * e10 + v * e11)) / dy;
  };
  blend(q_, p.q, p.dq_dn, p.dq_dh, p.dq_dy);
  blend(t_, p.t, p.dt_dn, p.dt_dh, p.dt_dy);
  return p;
}

bool Characteristic::monotone_in_opening() const {
  for (std::size_t i = 0; i < n_.size(); ++i) {
    if (n_[i] < 0.0) continue;
    for (std::size_t j = 0; j < h_.size(); ++j) {
      for (std::size_t k = 1; k < y_.size(); ++k) {
        if (q_at(i, j, k) < q_at(i, j, k - 1)) return false;
      }
    }
  }
  return true;
}

Characteristic Characteristic::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open characteristic file '" + path + "'");
  return read_csv(in, path);
}

Characteristic Characteristic::read_csv(std::istream& in, const std::string& origin) {
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) { throw ConfigError(origin + ": " + what, line_no); };
  if (!std::getline(in, line)) fail("empty characteristic file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "n_pu,h_pu,y_pu,q_pu,t_pu") fail("expected header n_pu,h_pu,y_pu,q_pu,t_pu");

  std::map<std::tuple<double, double, double>, std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 5> v{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= v.size()) fail("too many columns");
      try {
        std::size_t used = 0;
        v[c] = std::stod(cell, &used);
        if (used != cell.size()) fail("malformed number '" + cell + "'");
      } catch (const std::logic_error&) {
        fail("malformed number '" + cell + "'");
      }
      ++c;
    }
    if (c != v.size()) fail("expected 5 columns");
    if (!rows.emplace(std::make_tuple(v[0], v[1], v[2]), std::make_pair(v[3], v[4])).second) {
      fail("duplicate grid node");
    }
  }
  std::vector<double> n, h, y;
  for (const auto& [key, val] : rows) {
    n.push_back(std::get<0>(key));
    h.push_back(std::get<1>(key));
    y.push_back(std::get<2>(key));
  }
  for (auto* axis : {&n, &h, &y}) {
    std::sort(axis->begin(), axis->end());
    axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
  }
  if (rows.size() != n.size() * h.size() * y.size()) {
    throw ConfigError(origin + ": grid is not rectilinear (" + std::to_string(rows.size()) + " rows)");
  }
  std::vector<double> q, t;
  q.reserve(rows.size());
  t.reserve(rows.size());
  for (const auto& [key, val] : rows) {  // map order is n, then h, then y
    q.push_back(val.first);
    t.push_back(val.second);
  }
  return Characteristic(std::move(n), std::move(h), std::move(y), std::move(q), std::move(t));
}

void Characteristic::write_csv(std::ostream& out) const {
  out << "n_pu,h_pu,y_pu,q_pu,t_pu\n";
  out << std::setprecision(12);
  for (std::size_t i = 0; i < n_.size(); ++i) {
    for (std::size_t j = 0; j < h_.size(); ++j) {
      for (std::size_t k = 0; k < y_.size(); ++k) {
        out << n_[i] << ',' << h_[j] << ',' << y_[k] << ',' << q_at(i, j, k) << ',' << t_at(i, j, k) << '\n';
      }
    }
  }
}

OperatingPoint synthetic_pump_turbine_point(double n, double h, double y) {
  OperatingPoint p;
  if (n >= 0.0) {
    std::tie(p.q, p.t) = turbine_shape(n, h, y);
  } else if (n <= kPumpBlendStart) {
    std::tie(p.q, p.t) = pump_shape(n, h, y);
  } else {
    // Linear bridge through the unstable zone between the two quadrants.
    const auto [qp, tp] = pump_shape(kPumpBlendStart, h, y);
    const auto [qt, tt] = turbine_shape(0.0, h, y);
    const double s = n / kPumpBlendStart;
    p.q = s * qp + (1.0 - s) * qt;
    p.t = s * tp + (1.0 - s) * tt;
  }
  return p;
}

Characteristic synthetic_pump_turbine() {
  std::vector<double> n, h, y;
  for (int i = -120; i <= -80; ++i) n.push_back(i / 100.0);
  for (int i = -7; i <= 5; ++i) n.push_back(i / 10.0);
  for (int i = 60; i <= 130; ++i) n.push_back(i / 100.0);
  for (int j = 14; j <= 26; ++j) h.push_back(j / 20.0);
  for (int k = 0; k <= 20; ++k) y.push_back(k / 20.0);
  std::vector<double> q, t;
  for (double nn : n) {
    for (double hh : h) {
      for (double yy : y) {
        const auto p = synthetic_pump_turbine_point(nn, hh, yy);
        q.push_back(p.q);
        t.push_back(p.t);
      }
    }
  }
  return Characteristic(std::move(n), std::move(h), std::move(y), std::move(q), std::move(t));
}

double RatedBase::omega_rad_s() const { return speed_rpm * 2.0 * std::numbers::pi / 60.0; }

OperatingPoint PhysicalMachine::evaluate_pu(double omega_rad_s, double head_m, double opening) const {
  return table_->evaluate(omega_rad_s / base_.omega_rad_s(), head_m / base_.head_m, opening);
}

hydraulic::MachineResponse PhysicalMachine::evaluate(double omega_rad_s, double head_m, double opening) const {
  const auto p = evaluate_pu(omega_rad_s, head_m, opening);
  const double w = base_.omega_rad_s();
  const double tq = base_.torque_nm();
  hydraulic::MachineResponse r;
  r.discharge = p.q * base_.discharge_m3s;
  r.torque = p.t * tq;
  r.dq_domega = p.dq_dn * base_.discharge_m3s / w;
  r.dq_dhead = p.dq_dh * base_.discharge_m3s / base_.head_m;
  r.dt_domega = p.dt_dn * tq / w;
  r.dt_dhead = p.dt_dh * tq / base_.head_m;
  r.dq_dopening = p.dq_dy * base_.discharge_m3s;
  r.dt_dopening = p.dt_dy * tq;
  return r;
}

}  // namespace hydroflex::unit
