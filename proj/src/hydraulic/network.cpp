#include "hydroflex/hydraulic/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "hydroflex/errors.hpp"

namespace hydroflex::hydraulic {

namespace {

// Regularisation of the orifice law around zero head difference [m].
constexpr double kOrificeEps = 1e-4;
constexpr double kAcceptResidual = 1e-7;

double orifice(double dh) { return dh / std::sqrt(std::abs(dh) + kOrificeEps); }

double orifice_slope(double dh) {
  const double a = std::abs(dh) + kOrificeEps;
  return (0.5 * std::abs(dh) + kOrificeEps) / (a * std::sqrt(a));
}

template <class T>
const T* as(const Element& e) {
  return std::get_if<T>(&e);
}

}  // namespace

double Pipe::area_m2() const { return std::numbers::pi * diameter_m * diameter_m / 4.0; }

const std::string& element_id(const Element& e) {
  return std::visit([](const auto& x) -> const std::string& { return x.id; }, e);
}

double darcy_head_loss(const Pipe& pipe, double discharge_m3s) {
  const double v = discharge_m3s / pipe.area_m2();
  return pipe.friction_factor * pipe.length_m / pipe.diameter_m * v * std::abs(v) / (2.0 * kGravity);
}

HydraulicNetwork build_network(const NetworkSpec& spec, const SolverSettings& settings) {
  return HydraulicNetwork(spec, settings);
}

HydraulicNetwork::HydraulicNetwork(NetworkSpec spec, SolverSettings settings)
    : spec_(std::move(spec)), settings_(settings) {
  if (!(settings_.dt_s > 0.0)) throw ConfigError("solver time step must be positive");

  std::map<std::string, int> by_id;
  for (int i = 0; i < static_cast<int>(spec_.elements.size()); ++i) {
    const auto& id = element_id(spec_.elements[i]);
    if (id.empty()) throw ConfigError("element with empty id");
    if (!by_id.emplace(id, i).second) throw ConfigError("duplicate element id '" + id + "'");
  }

  // Per-element index into the typed model arrays.
  std::vector<int> typed(spec_.elements.size(), -1);
  for (int i = 0; i < static_cast<int>(spec_.elements.size()); ++i) {
    const auto& e = spec_.elements[i];
    if (const auto* p = as<Pipe>(e)) {
      if (!(p->length_m > 0.0)) throw ConfigError("pipe '" + p->id + "': length must be positive");
      if (!(p->diameter_m > 0.0)) throw ConfigError("pipe '" + p->id + "': diameter must be positive");
      if (!(p->wave_speed_ms > 0.0)) throw ConfigError("pipe '" + p->id + "': wave speed must be positive");
      if (p->n_segments < 1) throw ConfigError("pipe '" + p->id + "': n_segments must be >= 1");
      if (p->friction_factor < 0.0) throw ConfigError("pipe '" + p->id + "': negative friction factor");
      PipeModel m;
      m.area = p->area_m2();
      const double travel = p->length_m / p->n_segments / p->wave_speed_ms;
      if (travel < settings_.dt_s * (1.0 - 1e-9)) {
        throw ConfigError("pipe '" + p->id + "': segment travel time " + std::to_string(travel) +
                          " s is shorter than the solver step; reduce n_segments");
      }
      // Whole pipe travel time in steps, split into the finest reach count
      // >= n_segments that divides it, so every reach lags a whole number of steps.
      const int total = std::max(1, static_cast<int>(std::lround(p->length_m / p->wave_speed_ms / settings_.dt_s)));
      int reaches = std::min(p->n_segments, total);
      while (total % reaches != 0) ++reaches;
      m.lag = total / reaches;
      m.dx = p->length_m / reaches;
      m.wave_speed = p->length_m / (total * settings_.dt_s);
      m.impedance = m.wave_speed / (kGravity * m.area);
      m.friction = p->friction_factor * m.dx / (2.0 * kGravity * p->diameter_m * m.area * m.area);
      m.total_friction = m.friction * reaches;
      m.nodes = reaches + 1;
      m.head.assign(m.lag, std::vector<double>(m.nodes, 0.0));
      m.flow.assign(m.lag, std::vector<double>(m.nodes, 0.0));
      typed[i] = static_cast<int>(pipes_.size());
      pipes_.push_back(std::move(m));
      pipe_ids_.push_back(p->id);
    } else if (const auto* t = as<SurgeTank>(e)) {
      if (!(t->cross_section_m2 > 0.0)) throw ConfigError("surge tank '" + t->id + "': cross section must be positive");
      if (!(t->min_level_m <= t->max_level_m)) throw ConfigError("surge tank '" + t->id + "': min_level above max_level");
      if (t->base_elevation_m > t->min_level_m) throw ConfigError("surge tank '" + t->id + "': base above min_level");
      if (t->throttle_loss < 0.0) throw ConfigError("surge tank '" + t->id + "': negative throttle loss");
      typed[i] = static_cast<int>(tanks_.size());
      tanks_.push_back({*t, -1});
      tank_ids_.push_back(t->id);
    } else if (const auto* r = as<Reservoir>(e)) {
      if (!std::isfinite(r->elevation_m)) throw ConfigError("reservoir '" + r->id + "': elevation not finite");
      typed[i] = static_cast<int>(reservoirs_.size());
      reservoirs_.push_back(*r);
      reservoir_ids_.push_back(r->id);
    } else if (const auto* v = as<Valve>(e)) {
      if (v->discharge_coefficient < 0.0) throw ConfigError("valve '" + v->id + "': negative discharge coefficient");
      if (v->opening < 0.0 || v->opening > 1.0) throw ConfigError("valve '" + v->id + "': opening outside [0, 1]");
      typed[i] = static_cast<int>(valves_.size());
      valves_.push_back({*v, -1, -1});
      valve_ids_.push_back(v->id);
    } else if (const auto* mn = as<MachineNode>(e)) {
      typed[i] = static_cast<int>(machines_.size());
      machines_.push_back({});
      machine_ids_.push_back(mn->id);
    }
  }

  // Port attachment.
  std::map<std::pair<int, Port>, int> attached;  // (element, port) -> junction
  std::set<std::string> junction_ids;
  junctions_.assign(spec_.junctions.size(), {});
  for (int j = 0; j < static_cast<int>(spec_.junctions.size()); ++j) {
    const auto& jn = spec_.junctions[j];
    if (!junction_ids.insert(jn.id).second) throw ConfigError("duplicate junction id '" + jn.id + "'");
    if (by_id.count(jn.id)) throw ConfigError("junction id '" + jn.id + "' clashes with an element id");
    if (jn.ports.empty()) throw ConfigError("junction '" + jn.id + "' has no ports");
    for (const auto& pr : jn.ports) {
      auto it = by_id.find(pr.element);
      if (it == by_id.end()) {
        throw ConfigError("junction '" + jn.id + "' references unknown element '" + pr.element + "'");
      }
      const int ei = it->second;
      const auto& e = spec_.elements[ei];
      const bool two_port = as<Pipe>(e) || as<Valve>(e) || as<MachineNode>(e);
      if (two_port == (pr.port == Port::Single)) {
        throw ConfigError("junction '" + jn.id + "': invalid port on element '" + pr.element + "'");
      }
      if (!attached.emplace(std::make_pair(ei, pr.port), j).second) {
        throw ConfigError("port of element '" + pr.element + "' attached to more than one junction");
      }
      const int k = typed[ei];
      if (as<Pipe>(e)) {
        (pr.port == Port::Upstream ? pipes_[k].up_junction : pipes_[k].down_junction) = j;
      } else if (as<Valve>(e)) {
        (pr.port == Port::Upstream ? valves_[k].up_junction : valves_[k].down_junction) = j;
      } else if (as<MachineNode>(e)) {
        (pr.port == Port::Upstream ? machines_[k].up_junction : machines_[k].down_junction) = j;
      } else if (as<SurgeTank>(e)) {
        tanks_[k].junction = j;
      } else if (as<Reservoir>(e)) {
        if (junctions_[j].reservoir >= 0) throw ConfigError("junction '" + jn.id + "' has two reservoirs");
        junctions_[j].reservoir = k;
      }
    }
  }
  for (int i = 0; i < static_cast<int>(spec_.elements.size()); ++i) {
    const auto& e = spec_.elements[i];
    const auto& id = element_id(e);
    auto missing = [&](Port p) { return attached.find({i, p}) == attached.end(); };
    if (as<Pipe>(e) || as<MachineNode>(e)) {
      if (missing(Port::Upstream) || missing(Port::Downstream)) {
        throw ConfigError("element '" + id + "' has an unattached port");
      }
    } else if (const auto* v = as<Valve>(e)) {
      if (missing(Port::Upstream)) throw ConfigError("valve '" + id + "' has an unattached upstream port");
      if (missing(Port::Downstream) && !v->outlet_head_m) {
        throw ConfigError("valve '" + id + "' needs a downstream junction or an outlet head");
      }
      if (!missing(Port::Downstream) && v->outlet_head_m) {
        throw ConfigError("valve '" + id + "' has both a downstream junction and an outlet head");
      }
    } else if (missing(Port::Single)) {
      throw ConfigError("element '" + id + "' is not attached to any junction");
    }
  }
  for (const auto& t : tanks_) {
    if (junctions_[t.junction].reservoir >= 0) {
      throw ConfigError("surge tank '" + t.spec.id + "' shares a junction with a reservoir");
    }
  }

  // Connectivity over the junction graph.
  if (!junctions_.empty()) {
    std::vector<std::vector<int>> adj(junctions_.size());
    auto link = [&](int a, int b) {
      if (a >= 0 && b >= 0) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    };
    for (const auto& p : pipes_) link(p.up_junction, p.down_junction);
    for (const auto& v : valves_) link(v.up_junction, v.down_junction);
    for (const auto& m : machines_) link(m.up_junction, m.down_junction);
    std::vector<bool> seen(junctions_.size(), false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      for (int k : adj[j]) {
        if (!seen[k]) {
          seen[k] = true;
          stack.push_back(k);
        }
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw ConfigError("hydraulic network is not connected");
    }
  }

  for (auto& j : junctions_) {
    if (j.reservoir < 0) j.unknown = free_junctions_++;
  }

  state_.junction_head_m.assign(junctions_.size(), 0.0);
  state_.pipes.resize(pipes_.size());
  for (std::size_t i = 0; i < pipes_.size(); ++i) {
    state_.pipes[i].head_m.assign(pipes_[i].nodes, 0.0);
    state_.pipes[i].discharge_m3s.assign(pipes_[i].nodes, 0.0);
  }
  state_.tank_level_m.assign(tanks_.size(), 0.0);
  state_.tank_inflow_m3s.assign(tanks_.size(), 0.0);
  state_.valve_discharge_m3s.assign(valves_.size(), 0.0);
  state_.machines.assign(machines_.size(), {});
}

namespace {
int find_index(const std::vector<std::string>& ids, const std::string& id, const char* what) {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ConfigError(std::string("unknown ") + what + " '" + id + "'");
  return static_cast<int>(it - ids.begin());
}
}  // namespace

int HydraulicNetwork::pipe_index(const std::string& id) const { return find_index(pipe_ids_, id, "pipe"); }
int HydraulicNetwork::tank_index(const std::string& id) const { return find_index(tank_ids_, id, "surge tank"); }
int HydraulicNetwork::valve_index(const std::string& id) const { return find_index(valve_ids_, id, "valve"); }
int HydraulicNetwork::machine_index(const std::string& id) const {
  return find_index(machine_ids_, id, "machine");
}
int HydraulicNetwork::reservoir_index(const std::string& id) const {
  return find_index(reservoir_ids_, id, "reservoir");
}
int HydraulicNetwork::junction_index(const std::string& id) const {
  for (int j = 0; j < static_cast<int>(spec_.junctions.size()); ++j) {
    if (spec_.junctions[j].id == id) return j;
  }
  throw ConfigError("unknown junction '" + id + "'");
}

double HydraulicNetwork::effective_wave_speed(int pipe) const { return pipes_.at(pipe).wave_speed; }
int HydraulicNetwork::reach_lag_steps(int pipe) const { return pipes_.at(pipe).lag; }
int HydraulicNetwork::reach_count(int pipe) const { return pipes_.at(pipe).nodes - 1; }

void HydraulicNetwork::set_reservoir_elevation(int reservoir, double elevation_m) {
  reservoirs_.at(reservoir).elevation_m = elevation_m;
}
double HydraulicNetwork::reservoir_elevation(int reservoir) const { return reservoirs_.at(reservoir).elevation_m; }

void HydraulicNetwork::set_valve_opening(int valve, double opening) {
  if (opening < 0.0 || opening > 1.0) throw ConfigError("valve opening outside [0, 1]");
  valves_.at(valve).spec.opening = opening;
}

double HydraulicNetwork::head_at(int junction, const std::vector<double>& free_heads) const {
  const auto& j = junctions_[junction];
  return j.reservoir >= 0 ? reservoirs_[j.reservoir].elevation_m : free_heads[j.unknown];
}

// ---------------------------------------------------------------------------
// Steady state
// ---------------------------------------------------------------------------

const NetworkState& HydraulicNetwork::steady_state(std::span<const MachineSetpoint> machines) {
  using Kind = MachineSetpoint::Kind;
  if (machines.size() != machines_.size()) throw ConfigError("machine setpoint count mismatch");
  for (const auto& m : machines) {
    if (m.kind != Kind::Offline && m.model == nullptr) throw ConfigError("machine setpoint without a model");
  }

  const int F = free_junctions_;
  const int P = static_cast<int>(pipes_.size());
  const int V = static_cast<int>(valves_.size());
  const int M = static_cast<int>(machines_.size());
  std::vector<int> q_index(M, -1), x_index(M, -1);
  int n = F + P + V;
  for (int i = 0; i < M; ++i) {
    if (machines[i].kind != Kind::Offline) q_index[i] = n++;
  }
  for (int i = 0; i < M; ++i) {
    if (machines[i].kind == Kind::PowerByOpening || machines[i].kind == Kind::PowerBySpeed) x_index[i] = n++;
  }

  double h_mean = 0.0;
  double h_spread = 1.0;
  if (!reservoirs_.empty()) {
    double lo = reservoirs_[0].elevation_m, hi = lo;
    for (const auto& r : reservoirs_) {
      h_mean += r.elevation_m;
      lo = std::min(lo, r.elevation_m);
      hi = std::max(hi, r.elevation_m);
    }
    h_mean /= reservoirs_.size();
    h_spread = std::max(1.0, hi - lo);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (F > 0) {
    // Initial heads from a linear conductance network in which machines and
    // throttled valves are much stiffer than pipes.
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(F, F);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(F);
    auto couple = [&](int a, int c, double g) {
      const int ia = junctions_[a].unknown, ic = c >= 0 ? junctions_[c].unknown : -1;
      auto fixed = [&](int j) { return j >= 0 && junctions_[j].reservoir >= 0 ? reservoirs_[junctions_[j].reservoir].elevation_m : 0.0; };
      if (ia >= 0) {
        L(ia, ia) += g;
        if (ic >= 0) L(ia, ic) -= g;
        else if (c >= 0) b[ia] += g * fixed(c);
      }
      if (ic >= 0) {
        L(ic, ic) += g;
        if (ia >= 0) L(ic, ia) -= g;
        else b[ic] += g * fixed(a);
      }
    };
    for (const auto& pm : pipes_) couple(pm.up_junction, pm.down_junction, 1.0);
    for (const auto& vm : valves_) {
      const double g = vm.spec.opening * vm.spec.discharge_coefficient > 0.0 ? 1e-2 : 1e-6;
      if (vm.down_junction >= 0) {
        couple(vm.up_junction, vm.down_junction, g);
      } else if (junctions_[vm.up_junction].unknown >= 0) {
        L(junctions_[vm.up_junction].unknown, junctions_[vm.up_junction].unknown) += g;
        b[junctions_[vm.up_junction].unknown] += g * *vm.spec.outlet_head_m;
      }
    }
    for (const auto& mm : machines_) couple(mm.up_junction, mm.down_junction, 1e-3);
    for (int k = 0; k < F; ++k) {
      L(k, k) += 1e-9;
      b[k] += 1e-9 * h_mean;
    }
    x.head(F) = L.fullPivLu().solve(b);
  }
  for (int i = 0; i < M; ++i) {
    if (machines[i].kind == Kind::PowerByOpening) x[x_index[i]] = machines[i].opening > 0 ? machines[i].opening : 0.5;
    if (machines[i].kind == Kind::PowerBySpeed) x[x_index[i]] = machines[i].omega;
  }

  auto heads_of = [&](const Eigen::VectorXd& v) {
    std::vector<double> h(F);
    for (int k = 0; k < F; ++k) h[k] = v[k];
    return h;
  };
  auto omega_of = [&](const Eigen::VectorXd& v, int i) {
    return machines[i].kind == Kind::PowerBySpeed ? v[x_index[i]] : machines[i].omega;
  };
  auto opening_of = [&](const Eigen::VectorXd& v, int i) {
    return machines[i].kind == Kind::PowerByOpening ? v[x_index[i]] : machines[i].opening;
  };

  double q_scale = 1.0;
  double p_scale = 1.0;
  for (const auto& m : machines) p_scale = std::max(p_scale, std::abs(m.mechanical_power_w));

  auto evaluate = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.setZero(n);
    if (J) J->setZero(n, n);
    const auto H = heads_of(v);
    auto add_flow = [&](int junction, double sign, double q, int col) {
      const int row = junctions_[junction].unknown;
      if (row < 0) return;
      r[row] += sign * q;
      if (J && col >= 0) (*J)(row, col) += sign;
    };
    for (int p = 0; p < P; ++p) {
      const auto& pm = pipes_[p];
      const int c = F + p;
      const double q = v[c];
      add_flow(pm.up_junction, -1.0, q, c);
      add_flow(pm.down_junction, +1.0, q, c);
      const double hu = head_at(pm.up_junction, H), hd = head_at(pm.down_junction, H);
      r[c] = hu - hd - pm.total_friction * q * std::abs(q);
      if (J) {
        if (junctions_[pm.up_junction].unknown >= 0) (*J)(c, junctions_[pm.up_junction].unknown) += 1.0;
        if (junctions_[pm.down_junction].unknown >= 0) (*J)(c, junctions_[pm.down_junction].unknown) -= 1.0;
        (*J)(c, c) = -2.0 * pm.total_friction * std::abs(q);
      }
    }
    for (int k = 0; k < V; ++k) {
      const auto& vm = valves_[k];
      const int c = F + P + k;
      const double q = v[c];
      add_flow(vm.up_junction, -1.0, q, c);
      if (vm.down_junction >= 0) add_flow(vm.down_junction, +1.0, q, c);
      const double hu = head_at(vm.up_junction, H);
      const double hd = vm.down_junction >= 0 ? head_at(vm.down_junction, H) : *vm.spec.outlet_head_m;
      const double cv = vm.spec.discharge_coefficient * vm.spec.opening;
      r[c] = q - cv * orifice(hu - hd);
      if (J) {
        (*J)(c, c) = 1.0;
        const double s = cv * orifice_slope(hu - hd);
        if (junctions_[vm.up_junction].unknown >= 0) (*J)(c, junctions_[vm.up_junction].unknown) -= s;
        if (vm.down_junction >= 0 && junctions_[vm.down_junction].unknown >= 0) {
          (*J)(c, junctions_[vm.down_junction].unknown) += s;
        }
      }
    }
    for (int i = 0; i < M; ++i) {
      if (q_index[i] < 0) continue;
      const auto& mm = machines_[i];
      const int c = q_index[i];
      const double q = v[c];
      add_flow(mm.up_junction, -1.0, q, c);
      add_flow(mm.down_junction, +1.0, q, c);
      const double head = head_at(mm.up_junction, H) - head_at(mm.down_junction, H);
      const double w = omega_of(v, i);
      const double y = opening_of(v, i);
      const auto resp = machines[i].model->evaluate(w, head, y);
      r[c] = q - resp.discharge;
      const int ju = junctions_[mm.up_junction].unknown, jd = junctions_[mm.down_junction].unknown;
      if (J) {
        (*J)(c, c) = 1.0;
        if (ju >= 0) (*J)(c, ju) -= resp.dq_dhead;
        if (jd >= 0) (*J)(c, jd) += resp.dq_dhead;
      }
      if (x_index[i] >= 0) {
        const int e = x_index[i];
        r[e] = (resp.torque * w - machines[i].mechanical_power_w) / p_scale;
        if (J) {
          if (ju >= 0) (*J)(e, ju) += resp.dt_dhead * w / p_scale;
          if (jd >= 0) (*J)(e, jd) -= resp.dt_dhead * w / p_scale;
          if (machines[i].kind == Kind::PowerByOpening) {
            (*J)(c, e) = -resp.dq_dopening;
            (*J)(e, e) = resp.dt_dopening * w / p_scale;
          } else {
            (*J)(c, e) = -resp.dq_domega;
            (*J)(e, e) = (resp.dt_domega * w + resp.torque) / p_scale;
          }
        }
      }
    }
  };

  std::vector<bool> is_power(n, false);
  for (int i = 0; i < M; ++i) {
    if (x_index[i] >= 0) is_power[x_index[i]] = true;
  }
  auto scaled_norm = [&](const Eigen::VectorXd& r) {
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      double s = q_scale;
      if (k >= F && k < F + P) s = h_spread;
      if (is_power[k]) s = 1.0;
      worst = std::max(worst, std::abs(r[k]) / s);
    }
    return worst;
  };

  Eigen::VectorXd r(n), r_trial(n);
  Eigen::MatrixXd J(n, n);
  bool converged = (n == 0);
  double res = 0.0;
  for (int it = 0; it < 200 && !converged; ++it) {
    evaluate(x, r, &J);
    for (int p = 0; p < P; ++p) q_scale = std::max(q_scale, std::abs(x[F + p]));
    res = scaled_norm(r);
    if (res < 1e-12) {
      converged = true;
      break;
    }
    Eigen::VectorXd dx = J.fullPivLu().solve(-r);
    if (!dx.allFinite()) break;
    // Backtracking on the scaled residual.
    double step = 1.0;
    for (int ls = 0; ls < 30; ++ls) {
      Eigen::VectorXd trial = x + step * dx;
      evaluate(trial, r_trial, nullptr);
      if (scaled_norm(r_trial) < (1.0 - 1e-4 * step) * res || ls == 29) {
        x = trial;
        break;
      }
      step *= 0.5;
    }
  }
  evaluate(x, r, nullptr);
  res = scaled_norm(r);
  if (!(res < 1e-8) || !x.allFinite()) {
    throw SimulationError("steady state did not converge (residual " + std::to_string(res) + ")", 0.0);
  }
  steady_residual_ = res;

  // Install the solution.
  const auto H = heads_of(x);
  for (int j = 0; j < static_cast<int>(junctions_.size()); ++j) state_.junction_head_m[j] = head_at(j, H);
  for (int p = 0; p < P; ++p) {
    auto& pm = pipes_[p];
    const double q = x[F + p];
    const double hu = state_.junction_head_m[pm.up_junction];
    const double dh = pm.friction * q * std::abs(q);
    for (int lvl = 0; lvl < pm.lag; ++lvl) {
      for (int k = 0; k < pm.nodes; ++k) {
        pm.head[lvl][k] = hu - dh * k;
        pm.flow[lvl][k] = q;
      }
    }
    pm.newest = pm.lag - 1;
    state_.pipes[p].head_m = pm.head[pm.newest];
    state_.pipes[p].discharge_m3s = pm.flow[pm.newest];
  }
  for (std::size_t t = 0; t < tanks_.size(); ++t) {
    state_.tank_level_m[t] = state_.junction_head_m[tanks_[t].junction];
    state_.tank_inflow_m3s[t] = 0.0;
  }
  for (int k = 0; k < V; ++k) state_.valve_discharge_m3s[k] = x[F + P + k];
  for (int i = 0; i < M; ++i) {
    auto& ms = state_.machines[i];
    const auto& mm = machines_[i];
    ms = {};
    ms.omega_rad_s = omega_of(x, i);
    ms.opening = opening_of(x, i);
    ms.head_m = state_.junction_head_m[mm.up_junction] - state_.junction_head_m[mm.down_junction];
    if (q_index[i] >= 0) {
      const auto resp = machines[i].model->evaluate(ms.omega_rad_s, ms.head_m, ms.opening);
      ms.online = true;
      ms.discharge_m3s = x[q_index[i]];
      ms.torque_nm = resp.torque;
      ms.electrical_torque_nm = resp.torque;
    }
  }
  state_.time_s = 0.0;
  initialised_ = true;
  check_finite_and_limits();
  return state_;
}

// ---------------------------------------------------------------------------
// Transient step
// ---------------------------------------------------------------------------

const NetworkState& HydraulicNetwork::step(std::span<const MachineDrive> drives) {
  if (!initialised_) throw SimulationError("step before steady-state initialisation", state_.time_s);
  if (drives.size() != machines_.size()) throw ConfigError("machine drive count mismatch");
  const double dt = settings_.dt_s;
  const double t_new = state_.time_s + dt;

  // Interior characteristics and end constants per pipe.
  const int P = static_cast<int>(pipes_.size());
  std::vector<double> cp(P), cm(P);
  std::vector<std::vector<double>> new_h(P), new_q(P);
  for (int p = 0; p < P; ++p) {
    auto& pm = pipes_[p];
    const int old = (pm.newest + 1) % pm.lag;
    const auto& ho = pm.head[old];
    const auto& qo = pm.flow[old];
    const double B = pm.impedance, R = pm.friction;
    const int N = pm.nodes - 1;
    new_h[p].assign(pm.nodes, 0.0);
    new_q[p].assign(pm.nodes, 0.0);
    for (int i = 1; i < N; ++i) {
      const double c_plus = ho[i - 1] + B * qo[i - 1] - R * qo[i - 1] * std::abs(qo[i - 1]);
      const double c_minus = ho[i + 1] - B * qo[i + 1] + R * qo[i + 1] * std::abs(qo[i + 1]);
      new_h[p][i] = 0.5 * (c_plus + c_minus);
      new_q[p][i] = (c_plus - c_minus) / (2.0 * B);
    }
    cp[p] = ho[N - 1] + B * qo[N - 1] - R * qo[N - 1] * std::abs(qo[N - 1]);
    cm[p] = ho[1] - B * qo[1] + R * qo[1] * std::abs(qo[1]);
  }

  // Unknown layout: free heads | tank flows | valve flows | machine flows | free rotor speeds.
  const int F = free_junctions_;
  const int T = static_cast<int>(tanks_.size());
  const int V = static_cast<int>(valves_.size());
  const int M = static_cast<int>(machines_.size());
  std::vector<int> q_index(M, -1), w_index(M, -1);
  int n = F + T + V;
  for (int i = 0; i < M; ++i) {
    if (drives[i].mode != RotorMode::Offline) {
      if (drives[i].model == nullptr) throw ConfigError("machine drive without a model");
      q_index[i] = n++;
    }
  }
  for (int i = 0; i < M; ++i) {
    if (drives[i].mode == RotorMode::Free) {
      if (!(drives[i].inertia > 0.0)) throw ConfigError("free rotor needs a positive inertia");
      w_index[i] = n++;
    }
  }

  Eigen::VectorXd x(n);
  for (int j = 0; j < static_cast<int>(junctions_.size()); ++j) {
    if (junctions_[j].unknown >= 0) x[junctions_[j].unknown] = state_.junction_head_m[j];
  }
  for (int t = 0; t < T; ++t) x[F + t] = state_.tank_inflow_m3s[t];
  for (int k = 0; k < V; ++k) x[F + T + k] = state_.valve_discharge_m3s[k];
  for (int i = 0; i < M; ++i) {
    if (q_index[i] >= 0) x[q_index[i]] = state_.machines[i].online ? state_.machines[i].discharge_m3s : 0.0;
    if (w_index[i] >= 0) x[w_index[i]] = state_.machines[i].omega_rad_s;
  }

  auto omega_of = [&](const Eigen::VectorXd& v, int i) {
    return w_index[i] >= 0 ? v[w_index[i]] : drives[i].omega;
  };

  Eigen::VectorXd r(n);
  Eigen::MatrixXd J(n, n);
  auto evaluate = [&](const Eigen::VectorXd& v, bool jac) {
    r.setZero();
    if (jac) J.setZero();
    auto H = [&](int junction) {
      const auto& jm = junctions_[junction];
      return jm.reservoir >= 0 ? reservoirs_[jm.reservoir].elevation_m : v[jm.unknown];
    };
    auto col_of = [&](int junction) { return junctions_[junction].unknown; };
    auto add_flow = [&](int junction, double sign, double q, int col, double dq = 1.0) {
      const int row = junctions_[junction].unknown;
      if (row < 0) return;
      r[row] += sign * q;
      if (jac && col >= 0) J(row, col) += sign * dq;
    };
    for (int p = 0; p < P; ++p) {
      const auto& pm = pipes_[p];
      const double B = pm.impedance;
      // Downstream end flows into its junction: Q = (CP - H) / B.
      add_flow(pm.down_junction, +1.0, (cp[p] - H(pm.down_junction)) / B, col_of(pm.down_junction), -1.0 / B);
      // Upstream end draws from its junction: Q = (H - CM) / B.
      add_flow(pm.up_junction, -1.0, (H(pm.up_junction) - cm[p]) / B, col_of(pm.up_junction), 1.0 / B);
    }
    for (int t = 0; t < T; ++t) {
      const auto& tm = tanks_[t];
      const int c = F + t;
      const double q = v[c];
      add_flow(tm.junction, -1.0, q, c);
      const double level = state_.tank_level_m[t] + dt / (2.0 * tm.spec.cross_section_m2) * (state_.tank_inflow_m3s[t] + q);
      r[c] = H(tm.junction) - level - tm.spec.throttle_loss * q * std::abs(q);
      if (jac) {
        J(c, col_of(tm.junction)) += 1.0;
        J(c, c) = -dt / (2.0 * tm.spec.cross_section_m2) - 2.0 * tm.spec.throttle_loss * std::abs(q);
      }
    }
    for (int k = 0; k < V; ++k) {
      const auto& vm = valves_[k];
      const int c = F + T + k;
      const double q = v[c];
      add_flow(vm.up_junction, -1.0, q, c);
      if (vm.down_junction >= 0) add_flow(vm.down_junction, +1.0, q, c);
      const double hu = H(vm.up_junction);
      const double hd = vm.down_junction >= 0 ? H(vm.down_junction) : *vm.spec.outlet_head_m;
      const double cv = vm.spec.discharge_coefficient * vm.spec.opening;
      r[c] = q - cv * orifice(hu - hd);
      if (jac) {
        J(c, c) = 1.0;
        const double s = cv * orifice_slope(hu - hd);
        if (col_of(vm.up_junction) >= 0) J(c, col_of(vm.up_junction)) -= s;
        if (vm.down_junction >= 0 && col_of(vm.down_junction) >= 0) J(c, col_of(vm.down_junction)) += s;
      }
    }
    for (int i = 0; i < M; ++i) {
      if (q_index[i] < 0) continue;
      const auto& mm = machines_[i];
      const auto& d = drives[i];
      const int c = q_index[i];
      const double q = v[c];
      add_flow(mm.up_junction, -1.0, q, c);
      add_flow(mm.down_junction, +1.0, q, c);
      const double head = H(mm.up_junction) - H(mm.down_junction);
      const double w = omega_of(v, i);
      const auto resp = d.model->evaluate(w, head, d.opening);
      r[c] = q - resp.discharge;
      const int ju = col_of(mm.up_junction), jd = col_of(mm.down_junction);
      if (jac) {
        J(c, c) = 1.0;
        if (ju >= 0) J(c, ju) -= resp.dq_dhead;
        if (jd >= 0) J(c, jd) += resp.dq_dhead;
      }
      if (w_index[i] >= 0) {
        const int e = w_index[i];
        const auto& prev = state_.machines[i];
        const double k = dt / (2.0 * d.inertia);
        const double w_safe = std::abs(w) > 1e-6 ? w : (w < 0 ? -1e-6 : 1e-6);
        const double te = d.electrical_power_w / w_safe;
        r[e] = (w - prev.omega_rad_s) - k * ((prev.torque_nm - prev.electrical_torque_nm) + (resp.torque - te));
        if (jac) {
          J(c, e) = -resp.dq_domega;
          J(e, e) = 1.0 - k * (resp.dt_domega + d.electrical_power_w / (w_safe * w_safe));
          if (ju >= 0) J(e, ju) -= k * resp.dt_dhead;
          if (jd >= 0) J(e, jd) += k * resp.dt_dhead;
        }
      }
    }
  };

  double res = 0.0;
  bool converged = false;
  for (int it = 0; it < settings_.max_iterations; ++it) {
    evaluate(x, true);
    res = r.cwiseAbs().maxCoeff();
    if (res < settings_.tolerance) {
      converged = true;
      break;
    }
    Eigen::VectorXd dx = J.partialPivLu().solve(-r);
    if (!dx.allFinite()) break;
    x += dx;
  }
  if (!converged) {
    evaluate(x, false);
    res = n > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
    if (!(res < kAcceptResidual)) {
      throw SimulationError("boundary solve did not converge (residual " + std::to_string(res) + ")", t_new);
    }
  }
  if (!x.allFinite()) throw SimulationError("non-finite boundary state", t_new);

  // Commit.
  auto Hc = [&](int junction) {
    const auto& jm = junctions_[junction];
    return jm.reservoir >= 0 ? reservoirs_[jm.reservoir].elevation_m : x[jm.unknown];
  };
  for (int j = 0; j < static_cast<int>(junctions_.size()); ++j) state_.junction_head_m[j] = Hc(j);
  for (int p = 0; p < P; ++p) {
    auto& pm = pipes_[p];
    const int N = pm.nodes - 1;
    const double B = pm.impedance;
    const double hd = Hc(pm.down_junction), hu = Hc(pm.up_junction);
    new_h[p][N] = hd;
    new_q[p][N] = (cp[p] - hd) / B;
    new_h[p][0] = hu;
    new_q[p][0] = (hu - cm[p]) / B;
    const int slot = (pm.newest + 1) % pm.lag;
    pm.head[slot] = new_h[p];
    pm.flow[slot] = new_q[p];
    pm.newest = slot;
    state_.pipes[p].head_m = pm.head[slot];
    state_.pipes[p].discharge_m3s = pm.flow[slot];
  }
  for (int t = 0; t < T; ++t) {
    const double q = x[F + t];
    state_.tank_level_m[t] +=
        dt / (2.0 * tanks_[t].spec.cross_section_m2) * (state_.tank_inflow_m3s[t] + q);
    state_.tank_inflow_m3s[t] = q;
  }
  for (int k = 0; k < V; ++k) state_.valve_discharge_m3s[k] = x[F + T + k];
  for (int i = 0; i < M; ++i) {
    auto& ms = state_.machines[i];
    const auto& mm = machines_[i];
    const auto& d = drives[i];
    const double w_prev = ms.omega_rad_s;
    ms.head_m = state_.junction_head_m[mm.up_junction] - state_.junction_head_m[mm.down_junction];
    ms.opening = d.opening;
    if (q_index[i] < 0) {
      ms.online = false;
      ms.discharge_m3s = 0.0;
      ms.torque_nm = 0.0;
      ms.electrical_torque_nm = 0.0;
      ms.omega_rad_s = d.omega;
      continue;
    }
    ms.online = true;
    ms.discharge_m3s = x[q_index[i]];
    ms.omega_rad_s = omega_of(x, i);
    const auto resp = d.model->evaluate(ms.omega_rad_s, ms.head_m, ms.opening);
    ms.torque_nm = resp.torque;
    if (d.mode == RotorMode::Free) {
      ms.electrical_torque_nm = d.electrical_power_w / ms.omega_rad_s;
    } else {
      // Grid-locked rotor: electrical torque balances the hydraulic torque and
      // the inertial torque of the imposed speed change.
      ms.electrical_torque_nm = resp.torque - d.inertia * (ms.omega_rad_s - w_prev) / dt;
    }
  }
  state_.time_s = t_new;
  check_finite_and_limits();
  return state_;
}

void HydraulicNetwork::check_finite_and_limits() const {
  for (double h : state_.junction_head_m) {
    if (!std::isfinite(h)) throw SimulationError("non-finite junction head", state_.time_s);
  }
  for (std::size_t t = 0; t < tanks_.size(); ++t) {
    const double z = state_.tank_level_m[t];
    const auto& s = tanks_[t].spec;
    if (!std::isfinite(z)) throw SimulationError("non-finite surge tank level", state_.time_s);
    if (z < s.min_level_m || z > s.max_level_m) {
      throw SimulationError("surge tank '" + s.id + "' level " + std::to_string(z) + " m outside [" +
                                std::to_string(s.min_level_m) + ", " + std::to_string(s.max_level_m) + "]",
                            state_.time_s);
    }
  }
  for (const auto& m : state_.machines) {
    if (!std::isfinite(m.discharge_m3s) || !std::isfinite(m.omega_rad_s) || !std::isfinite(m.torque_nm)) {
      throw SimulationError("non-finite machine state", state_.time_s);
    }
  }
}

double HydraulicNetwork::junction_imbalance(int junction) const {
  double sum = 0.0;
  for (std::size_t p = 0; p < pipes_.size(); ++p) {
    const auto& q = state_.pipes[p].discharge_m3s;
    if (pipes_[p].down_junction == junction) sum += q.back();
    if (pipes_[p].up_junction == junction) sum -= q.front();
  }
  for (std::size_t t = 0; t < tanks_.size(); ++t) {
    if (tanks_[t].junction == junction) sum -= state_.tank_inflow_m3s[t];
  }
  for (std::size_t k = 0; k < valves_.size(); ++k) {
    if (valves_[k].up_junction == junction) sum -= state_.valve_discharge_m3s[k];
    if (valves_[k].down_junction == junction) sum += state_.valve_discharge_m3s[k];
  }
  for (std::size_t i = 0; i < machines_.size(); ++i) {
    if (!state_.machines[i].online) continue;
    if (machines_[i].up_junction == junction) sum -= state_.machines[i].discharge_m3s;
    if (machines_[i].down_junction == junction) sum += state_.machines[i].discharge_m3s;
  }
  return sum;
}

double HydraulicNetwork::max_junction_imbalance() const {
  double worst = 0.0;
  for (int j = 0; j < static_cast<int>(junctions_.size()); ++j) {
    if (junctions_[j].reservoir >= 0) continue;  // reservoirs absorb any imbalance
    worst = std::max(worst, std::abs(junction_imbalance(j)));
  }
  return worst;
}

}  // namespace hydroflex::hydraulic
