#include "hydroflex/plant/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "hydroflex/control/governor.hpp"
#include "hydroflex/control/hbh.hpp"
#include "hydroflex/errors.hpp"
#include "hydroflex/unit/converter.hpp"

namespace hydroflex::plant {

namespace {

struct LiveUnit {
  const UnitProgram* prog = nullptr;
  const unit::UnitConfig* cfg = nullptr;
  int machine = -1;
  bool variable = false;
  bool pump = false;
  double n_ref_rpm = 0.0;
  double n_rpm = 0.0;
  double n_prev_rpm = 0.0;
  double p_mw = 0.0;
  double p0_mw = 0.0;
  double y = 0.0;
  double inertia = 0.0;
  double fcr_mw = 0.0;
  std::optional<control::Governor> governor;
  std::optional<unit::Converter> converter;
  std::optional<unit::StrategySwitch> sw;
  std::optional<control::FfrController> ffr;
  std::optional<control::RocofEstimator> rocof;
  std::optional<control::HbhSplitter> hbh;
};

double ramp_toward(double x, double target, double rate, double dt) {
  if (rate <= 0.0) return target;
  return x + std::clamp(target - x, -rate * dt, rate * dt);
}

}  // namespace

void Trace::write_csv(std::ostream& out, std::size_t every) const {
  out << "t_s,f_hz";
  for (const auto& u : units) {
    out << ',' << u.id << "_n_rpm," << u.id << "_P_MW," << u.id << "_Q_m3s," << u.id << "_H_m," << u.id << "_y_pu";
  }
  if (!bess_mw.empty()) out << ",bess_P_MW,bess_soc";
  out << ",plant_P_MW\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.6f", v == 0.0 ? 0.0 : v);
    out << buf;
  };
  every = std::max<std::size_t>(every, 1);
  for (std::size_t k = 0; k < t.size(); k = (k + every < t.size() || k + 1 == t.size()) ? k + every : t.size() - 1) {
    std::snprintf(buf, sizeof buf, "%.3f,%.6f", t[k], f_hz[k]);
    out << buf;
    for (const auto& u : units) {
      put(u.n_rpm[k]);
      put(u.p_mw[k]);
      put(u.q_m3s[k]);
      put(u.h_m[k]);
      put(u.y[k]);
    }
    if (!bess_mw.empty()) {
      put(bess_mw[k]);
      put(bess_soc[k]);
    }
    put(plant_mw[k]);
    out << '\n';
  }
}

PlantSimulator::PlantSimulator(const PlantConfig& cfg, TechnologyStack stack,
                               std::shared_ptr<const unit::Characteristic> table)
    : cfg_(cfg), stack_(std::move(stack)), units_(cfg.units), table_(std::move(table)) {
  if (!table_) table_ = load_characteristic(cfg_);
  for (auto& u : units_) u.technology = stack_.technology;
  if (stack_.hbh && !cfg_.bess) throw ConfigError("stack '" + stack_.label + "' needs a battery");
}

double PlantSimulator::head_min() const { return units_.front().head_min_m; }
double PlantSimulator::head_max() const { return units_.front().head_max_m; }

unit::PowerRange PlantSimulator::turbine_range(std::size_t i) const { return units_[i].turbine_range_with(stack_.spps); }

Trace PlantSimulator::run(const Scenario& sc) const {
  if (sc.units.size() != units_.size()) throw ConfigError("scenario must program every unit");
  hydraulic::HydraulicNetwork net(cfg_.network, cfg_.solver);
  net.set_reservoir_elevation(net.reservoir_index(cfg_.lower_reservoir), cfg_.lower_elevation_m);
  net.set_reservoir_elevation(net.reservoir_index(cfg_.upper_reservoir), cfg_.lower_elevation_m + sc.head_m);
  const unit::PhysicalMachine model(table_.get(), cfg_.machine.base);
  const ControlConfig& ctl = control();
  const double dt = cfg_.solver.dt_s;
  const double fn = units_.front().nominal_frequency_hz;
  auto grid_f = [&](double t) { return sc.frequency_hz ? sc.frequency_hz(t) : fn; };
  auto meas_f = [&](double t) { return sc.measured_hz ? sc.measured_hz(t) : grid_f(t); };
  const double f0 = meas_f(0.0);

  std::vector<LiveUnit> live(units_.size());
  std::vector<hydraulic::MachineSetpoint> sp(net.machine_count());
  for (std::size_t i = 0; i < units_.size(); ++i) {
    auto& lu = live[i];
    lu.prog = &sc.units[i];
    lu.cfg = &units_[i];
    lu.machine = net.machine_index(units_[i].machine_node);
    if (!lu.prog->online) continue;
    const auto& u = units_[i];
    lu.variable = unit::variable_speed(u.technology);
    lu.pump = lu.prog->mode == unit::Mode::Pump;
    if (lu.pump && !u.reversible()) throw InfeasibleError("unit '" + u.id + "' cannot pump");
    lu.inertia = u.inertia_kgm2();
    double n0 = lu.prog->n0_rpm;
    if (n0 <= 0.0) n0 = lu.variable ? u.speed_range.middle_rpm : u.synchronous_speed_rpm;
    if (!lu.variable) n0 = u.synchronous_speed_rpm * (lu.prog->islanded ? 1.0 : grid_f(0.0) / fn);
    lu.n_ref_rpm = n0;
    auto& s = sp[lu.machine];
    s.model = &model;
    s.omega = (lu.pump ? -1.0 : 1.0) * unit::rpm_to_rad_s(n0);
    if (lu.pump) {
      s.opening = ctl.pump_opening;
      if (lu.variable && lu.prog->p0_mw != 0.0) {
        s.kind = hydraulic::MachineSetpoint::Kind::PowerBySpeed;
        s.mechanical_power_w = lu.prog->p0_mw * 1e6;
      } else {
        s.kind = hydraulic::MachineSetpoint::Kind::Opening;
      }
    } else {
      s.kind = hydraulic::MachineSetpoint::Kind::PowerByOpening;
      s.opening = 0.5;
      s.mechanical_power_w = lu.prog->mode == unit::Mode::SpeedNoLoad ? 0.0 : lu.prog->p0_mw * 1e6;
    }
  }
  try {
    net.steady_state(sp);
  } catch (const SimulationError& e) {
    throw InfeasibleError(std::string("no steady operating point: ") + e.what());
  }

  std::optional<unit::Bess> bess;
  if (stack_.hbh) bess = *cfg_.bess;

  for (auto& lu : live) {
    if (!lu.prog->online) continue;
    const auto& u = *lu.cfg;
    const auto& ms = net.state().machines[lu.machine];
    lu.y = ms.opening;
    lu.n_rpm = lu.n_prev_rpm = std::abs(unit::rad_s_to_rpm(ms.omega_rad_s));
    lu.p_mw = lu.p0_mw = ms.torque_nm * ms.omega_rad_s / 1e6;
    if (!lu.pump) {
      if (lu.y > 1.0 + 1e-9 || lu.y < -1e-9) {
        throw InfeasibleError("unit '" + u.id + "': " + std::to_string(lu.p_mw) + " MW needs opening " +
                              std::to_string(lu.y));
      }
      const bool power_mode = !lu.variable && !lu.prog->islanded;
      auto gp = power_mode ? ctl.power_governor : ctl.speed_governor;
      if (lu.prog->islanded && ctl.island_governor) gp = *ctl.island_governor;
      gp.permanent_droop = ctl.permanent_droop;
      gp.power_base_mw = u.rated_power_mw;
      gp.nominal_frequency_hz = u.nominal_frequency_hz;
      gp.droop_limit_mw = lu.prog->fcr ? lu.prog->fcr->reserve_mw : 0.0;
      lu.governor.emplace(gp, lu.y);
      if (stack_.hbh && bess && lu.prog->fcr && power_mode) {
        const double droop = u.rated_power_mw / (ctl.permanent_droop * u.nominal_frequency_hz);
        lu.hbh.emplace(cfg_.hbh, dt, droop, bess->rated_power_mw);
      }
    }
    if (lu.variable && !lu.prog->islanded) {
      lu.converter.emplace(u.converter_lag_s, u.converter_rating(), lu.p_mw);
      if (lu.prog->strategy_switch) {
        const auto w = u.steady_speed_window();
        lu.sw.emplace(w.min_rpm, w.max_rpm, ctl.switch_hysteresis, ctl.switch_gain_pu, u.rated_power_mw,
                      u.synchronous_speed_rpm);
      }
      if (lu.prog->ffr) lu.ffr.emplace(*lu.prog->ffr);
      if (lu.prog->inertia_emulation) lu.rocof.emplace(ctl.rocof_window_s, dt, f0);
    }
  }

  const auto steps = static_cast<std::size_t>(std::llround(sc.duration_s / dt));
  Trace tr;
  tr.t.reserve(steps + 1);
  tr.units.resize(units_.size());
  for (std::size_t i = 0; i < units_.size(); ++i) {
    tr.units[i].id = units_[i].id;
    tr.units[i].n_min_rpm = tr.units[i].n_max_rpm = live[i].n_rpm;
  }
  double island_f = fn;
  auto record = [&](double t, double f, const hydraulic::NetworkState& st, const std::vector<double>& cmd) {
    tr.t.push_back(t);
    tr.f_hz.push_back(f);
    double plant = 0.0;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto& lu = live[i];
      const auto& ms = st.machines[lu.machine];
      auto& ut = tr.units[i];
      const bool on = lu.prog->online;
      ut.n_rpm.push_back(on ? lu.n_rpm : 0.0);
      ut.p_mw.push_back(on ? lu.p_mw : 0.0);
      ut.p_mech_mw.push_back(on ? ms.torque_nm * ms.omega_rad_s / 1e6 : 0.0);
      ut.q_m3s.push_back(ms.discharge_m3s);
      ut.h_m.push_back(ms.head_m);
      ut.y.push_back(on ? lu.y : 0.0);
      ut.command_mw.push_back(cmd[i]);
      if (on) {
        ut.n_min_rpm = std::min(ut.n_min_rpm, lu.n_rpm);
        ut.n_max_rpm = std::max(ut.n_max_rpm, lu.n_rpm);
      }
      plant += on ? lu.p_mw : 0.0;
    }
    if (bess) {
      tr.bess_mw.push_back(bess->power_mw);
      tr.bess_soc.push_back(bess->soc);
      plant += bess->power_mw;
    }
    tr.plant_mw.push_back(plant);
  };

  std::vector<double> cmd(live.size(), 0.0);
  for (std::size_t i = 0; i < live.size(); ++i) cmd[i] = live[i].p_mw;
  bool any_island = false;
  for (const auto& lu : live) any_island |= lu.prog->online && lu.prog->islanded && !lu.variable;
  record(0.0, f0, net.state(), cmd);

  std::vector<hydraulic::MachineDrive> drives(net.machine_count());
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t1 = static_cast<double>(k) * dt;
    const double f1 = meas_f(t1);
    const double fg = grid_f(t1);
    double bess_cmd = 0.0;
    for (std::size_t i = 0; i < live.size(); ++i) {
      auto& lu = live[i];
      auto& d = drives[lu.machine];
      d = {};
      if (!lu.prog->online) continue;
      const auto& u = *lu.cfg;
      const auto& p = *lu.prog;
      d.model = &model;
      d.inertia = lu.inertia;
      const double offset = p.offset_mw ? p.offset_mw(t1) : 0.0;
      double df = f1 - fn;
      if (p.fcr && std::abs(df) < p.fcr->deadband_hz) df = 0.0;

      if (p.islanded) {
        d.mode = hydraulic::RotorMode::Free;
        const double load = p.load_mw ? p.load_mw(t1) : 0.0;
        d.electrical_power_w = load * 1e6;
        cmd[i] = load;
        const double ff = lu.variable ? ctl.speed_power_feedforward * load / u.rated_power_mw : 0.0;
        lu.y = lu.governor->step_speed(lu.n_ref_rpm / u.synchronous_speed_rpm, lu.n_rpm / u.synchronous_speed_rpm, dt, ff);
        d.opening = lu.y;
        continue;
      }
      if (!lu.variable) {
        d.mode = hydraulic::RotorMode::Locked;
        d.omega = (lu.pump ? -1.0 : 1.0) * unit::rpm_to_rad_s(u.synchronous_speed_rpm * fg / fn);
        if (lu.pump) {
          d.opening = lu.y;
          cmd[i] = p.p0_mw;
          continue;
        }
        double p_ref = p.p0_mw + offset;
        double droop_df = p.fcr ? df : 0.0;
        if (lu.hbh) {
          const double demand = control::fcr_command(*p.fcr, f1);
          const double e_avail = bess->soc * bess->energy_capacity_mwh * 3600.0 / dt;
          const double e_room = (1.0 - bess->soc) * bess->energy_capacity_mwh * 3600.0 / dt;
          const auto split = lu.hbh->step(df, demand, bess->soc, std::min(bess->rated_power_mw, e_avail),
                                          std::min(bess->rated_power_mw, e_room));
          p_ref += split.turbine_mw;
          bess_cmd += split.bess_mw;
          droop_df = 0.0;
        }
        lu.y = lu.governor->step_power(p_ref, lu.p_mw, droop_df, dt);
        d.opening = lu.y;
        cmd[i] = p_ref - (droop_df != 0.0 ? droop_df / (u.nominal_frequency_hz * ctl.permanent_droop) *
                                                 u.rated_power_mw
                                           : 0.0);
        continue;
      }

      d.mode = hydraulic::RotorMode::Free;
      double set = lu.p0_mw + offset;
      if (p.fcr) {
        const double target = control::fcr_command(*p.fcr, f1);
        lu.fcr_mw = ramp_toward(lu.fcr_mw, target, ctl.fcr_ramp_mw_s, dt);
        set += lu.fcr_mw;
      }
      if (lu.ffr) set += lu.ffr->step(t1, f1);
      if (lu.rocof) set += control::inertia_emulation(lu.rocof->step(f1), u.tau_m_s, u.rated_power_mw, fn);
      if (lu.sw) set += lu.sw->update(lu.n_rpm, (lu.n_rpm - lu.n_prev_rpm) / dt, ctl.switch_horizon_s);
      cmd[i] = set;
      d.electrical_power_w = lu.converter->step(set, dt, t1) * 1e6;
      if (lu.governor) {
        const double ff = ctl.speed_power_feedforward * (set - lu.p0_mw) / u.rated_power_mw;
        lu.y = lu.governor->step_speed(lu.n_ref_rpm / u.synchronous_speed_rpm, lu.n_rpm / u.synchronous_speed_rpm, dt, ff);
      }
      d.opening = lu.y;
    }
    if (bess) unit::bess_step(*bess, bess_cmd, dt);

    const auto& st = net.step(drives);
    for (auto& lu : live) {
      if (!lu.prog->online) continue;
      const auto& ms = st.machines[lu.machine];
      lu.n_prev_rpm = lu.n_rpm;
      lu.n_rpm = std::abs(unit::rad_s_to_rpm(ms.omega_rad_s));
      const auto& d = drives[lu.machine];
      lu.p_mw = d.mode == hydraulic::RotorMode::Free ? d.electrical_power_w / 1e6
                                                     : ms.electrical_torque_nm * ms.omega_rad_s / 1e6;
      if (lu.variable) unit::check_stall(*lu.cfg, lu.n_rpm, t1);
      if (lu.prog->islanded && !lu.variable) island_f = fn * lu.n_rpm / lu.cfg->synchronous_speed_rpm;
    }
    record(t1, any_island ? island_f : f1, st, cmd);
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    if (live[i].sw) tr.units[i].switch_activations = live[i].sw->activations();
    if (live[i].governor) tr.units[i].travel = live[i].governor->travel();
  }
  return tr;
}

}  // namespace hydroflex::plant
