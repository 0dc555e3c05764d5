#include "hydroflex/qualification/tests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hydroflex/control/hsc.hpp"
#include "hydroflex/errors.hpp"

namespace hydroflex::qualification {

using plant::PlantSimulator;
using plant::Scenario;
using plant::Trace;
using plant::UnitProgram;

namespace {

constexpr std::size_t kTurbineUnit = 0;
constexpr std::size_t kPumpUnit = 1;

Scenario make_scenario(const PlantSimulator& sim, double duration) {
  Scenario sc;
  sc.head_m = sim.head_min();
  sc.duration_s = duration;
  sc.units.resize(sim.unit_count());
  return sc;
}

std::size_t pump_slot(const PlantSimulator& sim, TestMode mode) {
  if (mode == TestMode::Hsc) {
    if (sim.unit_count() < 2) throw ConfigError("hydraulic short circuit needs two units");
    return kPumpUnit;
  }
  return kTurbineUnit;
}

const unit::PowerRange& pump_range(const PlantSimulator& sim, std::size_t i) {
  const auto& u = sim.unit(i);
  if (!u.pump_range) throw InfeasibleError("unit '" + u.id + "' has no pump range");
  return *u.pump_range;
}

bool fixed_pump(const PlantSimulator& sim) { return !sim.stack().variable_speed(); }

UnitProgram turbine_program(const PlantSimulator& sim, std::size_t i, double p0) {
  UnitProgram p;
  p.online = true;
  p.mode = unit::Mode::Turbine;
  p.p0_mw = p0;
  (void)sim;
  (void)i;
  return p;
}

UnitProgram pump_program(const PlantSimulator& sim, std::size_t i, double p0) {
  pump_range(sim, i);
  UnitProgram p;
  p.online = true;
  p.mode = unit::Mode::Pump;
  p.p0_mw = p0;
  return p;
}

std::size_t index_of(const Trace& tr, double t) {
  const auto it = std::lower_bound(tr.t.begin(), tr.t.end(), t - 1e-9);
  return static_cast<std::size_t>(it - tr.t.begin());
}

/// Samples from the last pre-event sample on, time shifted to start at zero.
std::vector<double> window_time(const Trace& tr, std::size_t k0) {
  std::vector<double> t(tr.t.begin() + static_cast<std::ptrdiff_t>(k0), tr.t.end());
  const double t0 = t.front();
  for (auto& x : t) x -= t0;
  return t;
}

std::vector<double> window_delta(const std::vector<double>& p, std::size_t k0, double sign) {
  std::vector<double> d(p.begin() + static_cast<std::ptrdiff_t>(k0), p.end());
  const double p0 = d.front();
  for (auto& x : d) x = sign * (x - p0);
  return d;
}

double tail_mean(const std::vector<double>& t, const std::vector<double>& x, double span) {
  const double from = t.back() - span;
  double s = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] >= from - 1e-9) {
      s += x[k];
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

void merge(ComplianceReport& into, const ComplianceReport& from, const std::string& tag) {
  for (auto v : from.violations) {
    v.quantity += " (" + tag + ")";
    into.violations.push_back(std::move(v));
  }
  for (const auto& [k, v] : from.metrics) into.metrics[tag + "." + k] = v;
  for (const auto& n : from.notes) into.notes.push_back(tag + ": " + n);
}

ComplianceReport base_report(const PlantSimulator& sim, const std::string& service, TestMode mode) {
  ComplianceReport r;
  r.service = service;
  r.stack = sim.stack().label;
  r.mode = to_string(mode);
  return r;
}

// -- FCR --------------------------------------------------------------------

struct FcrSlot {
  std::size_t unit = 0;
  unit::Mode mode = unit::Mode::Turbine;
  double p0 = 0.0;
  double reserve = 0.0;
};

std::vector<FcrSlot> fcr_slots(const PlantSimulator& sim, TestMode mode) {
  std::vector<FcrSlot> s;
  if (mode != TestMode::Pump) {
    s.push_back({kTurbineUnit, unit::Mode::Turbine, sim.turbine_range(kTurbineUnit).mid(),
                 fcr_reserve(sim, kTurbineUnit, unit::Mode::Turbine)});
  }
  if (mode != TestMode::Turbine) {
    const auto i = pump_slot(sim, mode);
    s.push_back({i, unit::Mode::Pump, -pump_range(sim, i).mid(), fcr_reserve(sim, i, unit::Mode::Pump)});
  }
  return s;
}

struct FcrOutcome {
  ComplianceReport report;
  Trace trace;
  std::vector<double> unit_capability;
  std::vector<bool> unit_pass;
};

FcrOutcome fcr_once(const PlantSimulator& sim, TestMode mode, double direction, const std::vector<double>& scale) {
  const auto& q = sim.config().qualification;
  const auto& ctl = sim.control();
  const double fn = sim.unit(0).nominal_frequency_hz;
  const double settle = q.fcr_settle_s;
  auto sc = make_scenario(sim, settle + q.fcr.t_r_max_s + q.fcr.hold_s);
  const double f_step = fn - direction * q.fcr_step_hz;
  sc.measured_hz = [=](double t) { return t < settle - 1e-9 ? fn : f_step; };
  const auto slots = fcr_slots(sim, mode);
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const auto& s = slots[j];
    auto p = s.mode == unit::Mode::Turbine ? turbine_program(sim, s.unit, s.p0) : pump_program(sim, s.unit, s.p0);
    const bool pump = s.mode == unit::Mode::Pump;
    const auto& u = sim.unit(s.unit);
    control::FcrController f;
    f.permanent_droop = pump ? ctl.pump_permanent_droop : ctl.permanent_droop;
    f.deadband_hz = ctl.fcr_deadband_hz;
    f.reserve_mw = s.reserve * scale[j];
    f.nominal_frequency_hz = fn;
    f.power_base_mw = pump ? pump_range(sim, s.unit).max_mw : u.rated_power_mw;
    p.fcr = f;
    sc.units[s.unit] = p;
  }

  FcrOutcome out;
  out.report = base_report(sim, "FCR", mode);
  out.trace = sim.run(sc);
  const auto k0 = index_of(out.trace, settle) - 1;
  const auto t = window_time(out.trace, k0);
  std::vector<double> plant_dp(t.size(), 0.0);
  double plant_reserve = 0.0;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const auto& s = slots[j];
    const auto dp = window_delta(out.trace.units[s.unit].p_mw, k0, direction);
    for (std::size_t k = 0; k < dp.size(); ++k) plant_dp[k] += dp[k];
    const double rp = s.reserve * scale[j];
    const double sustained = tail_mean(t, dp, 10.0);
    const std::string tag = s.mode == unit::Mode::Pump ? "pump" : "turbine";
    double cap = 0.0;
    if (rp > 0.0) {
      auto r = check_fcr_envelope(t, dp, rp, q.fcr);
      if (slots.size() == 1) {
        out.report.violations = r.violations;
        for (const auto& [k, v] : r.metrics) out.report.metrics[k] = v;
      } else if (!r.violations.empty()) {
        out.report.notes.push_back(tag + " unit fails the envelope at this reserve");
        for (const auto& [k, v] : r.metrics) out.report.metrics[tag + "." + k] = v;
      }
      if (r.violations.empty()) {
        cap = sustained;
        plant_reserve += rp;
      }
    } else {
      out.report.notes.push_back(tag + " unit has no headroom");
      if (slots.size() == 1) out.report.add({0.0, "reserve", 0.0, 0.0});
    }
    out.unit_capability.push_back(cap);
    out.unit_pass.push_back(cap > 0.0);
    out.report.metrics[tag + "_reserve_mw"] = round3(rp);
    out.report.metrics[tag + "_sustained_mw"] = round3(sustained);
  }
  if (slots.size() > 1) {
    if (plant_reserve > 0.0) {
      auto r = check_fcr_envelope(t, plant_dp, plant_reserve, q.fcr);
      out.report.violations = r.violations;
      out.report.metrics["plant_sustained_mw"] = round3(tail_mean(t, plant_dp, 10.0));
      out.report.metrics["plant_reserve_mw"] = round3(plant_reserve);
    } else {
      out.report.add({0.0, "reserve", 0.0, 0.0});
    }
  }
  out.report.finalize();
  out.report.capability_mw =
      out.report.pass ? std::accumulate(out.unit_capability.begin(), out.unit_capability.end(), 0.0) : 0.0;
  return out;
}

// -- aFRR -------------------------------------------------------------------

struct AfrrSlot {
  std::size_t unit = 0;
  unit::Mode mode = unit::Mode::Turbine;
  unit::PowerRange range;  // generator convention
  bool modulating = true;
};

TestRun afrr_once(const PlantSimulator& sim, TestMode mode, double direction, std::vector<double>* unit_pr) {
  const auto& q = sim.config().qualification;
  const double dt = sim.dt();
  const double settle = q.fcr_settle_s;
  const double duration = settle + q.afrr.t_end_s;
  std::vector<AfrrSlot> slots;
  if (mode != TestMode::Pump) slots.push_back({kTurbineUnit, unit::Mode::Turbine, sim.turbine_range(kTurbineUnit), true});
  if (mode != TestMode::Turbine) {
    const auto i = pump_slot(sim, mode);
    const auto& r = pump_range(sim, i);
    slots.push_back({i, unit::Mode::Pump, {-r.max_mw, -r.min_mw}, !fixed_pump(sim)});
  }
  auto sc = make_scenario(sim, duration);
  std::vector<control::HscUnit> hsc;
  double plant_p0 = 0.0, plant_pr = 0.0;
  for (const auto& s : slots) {
    const double p0 = direction > 0 ? s.range.min_mw : s.range.max_mw;
    const double p_start = s.modulating || s.mode == unit::Mode::Turbine ? p0 : s.range.mid();
    sc.units[s.unit] = s.mode == unit::Mode::Turbine ? turbine_program(sim, s.unit, p_start)
                                                     : pump_program(sim, s.unit, p_start);
    hsc.push_back({sim.unit(s.unit).technology, s.mode, s.range.min_mw, s.range.max_mw, p_start});
    plant_p0 += p_start;
    const double pr = s.modulating ? s.range.span() / 2.0 : 0.0;
    plant_pr += pr;
    if (unit_pr) unit_pr->push_back(pr);
  }
  TestRun run;
  run.report = base_report(sim, "aFRR", mode);
  if (!(plant_pr > 0.0)) {
    run.report.notes.push_back("fixed-speed pump input power cannot be modulated");
    run.report.add({0.0, "reserve", 0.0, 0.0});
    // Nominal band of the unit, to show the absent response.
    plant_pr = slots.front().range.span() / 2.0;
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  control::AfrrController ctrl{plant_pr, q.afrr.filter_time_constant_s, q.afrr_ramp_s};
  auto raw = std::make_shared<std::vector<double>>(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    (*raw)[k] = control::afrr_raw_setpoint(ctrl, plant_p0, direction, std::max(0.0, k * dt - settle));
  }
  auto filtered = std::make_shared<std::vector<double>>(control::afrr_filtered_setpoint(ctrl, *raw, dt));
  auto share = [filtered, hsc, plant_p0, dt](std::size_t slot) {
    return [=](double t) {
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::llround(t / dt)), filtered->size() - 1);
      const double m = (*filtered)[k] - plant_p0;
      if (hsc.size() == 1) return hsc[0].modulating() ? m : 0.0;
      return control::hsc_dispatch(m, hsc)[slot] - hsc[slot].setpoint_mw;
    };
  };
  for (std::size_t j = 0; j < slots.size(); ++j) sc.units[slots[j].unit].offset_mw = share(j);

  run.trace = sim.run(sc);
  const auto k0 = index_of(run.trace, settle);
  const auto t = window_time(run.trace, k0);
  std::vector<double> p(run.trace.plant_mw.begin() + static_cast<std::ptrdiff_t>(k0), run.trace.plant_mw.end());
  std::vector<double> rw(raw->begin() + static_cast<std::ptrdiff_t>(k0), raw->end());
  // A fixed-speed pump settles at its own input power, not at the nominal start.
  const double bias = run.trace.plant_mw[k0] - plant_p0;
  for (auto& v : rw) v += bias;
  auto r = check_afrr_envelope(t, p, rw, plant_pr, q.afrr);
  for (const auto& v : r.violations) run.report.violations.push_back(v);
  for (const auto& [k, v] : r.metrics) run.report.metrics[k] = round3(v);
  run.report.metrics["reserve_band_mw"] = round3(plant_pr);
  run.report.finalize();
  run.report.capability_mw = run.report.pass ? plant_pr : 0.0;
  return run;
}

// -- FFR --------------------------------------------------------------------

bool speed_within_limits(const PlantSimulator& sim, const Trace& tr, std::size_t i, ComplianceReport* r) {
  const auto& u = sim.unit(i);
  const auto& ut = tr.units[i];
  bool ok = true;
  if (ut.n_min_rpm < u.transient_min_rpm()) {
    ok = false;
    if (r) r->add({0.0, "underspeed", ut.n_min_rpm, u.transient_min_rpm()});
  }
  if (ut.n_max_rpm > u.transient_max_rpm()) {
    ok = false;
    if (r) r->add({0.0, "overspeed", ut.n_max_rpm, u.transient_max_rpm()});
  }
  return ok;
}

}  // namespace

const char* to_string(TestMode m) {
  switch (m) {
    case TestMode::Turbine: return "turbine";
    case TestMode::Pump: return "pump";
    case TestMode::Hsc: return "hsc";
  }
  return "?";
}

double inertial_power(double tau_m_s, double power_base_mw, double rocof_hz_s, double fn) {
  return control::inertia_emulation(rocof_hz_s, tau_m_s, power_base_mw, fn);
}

double voltvar_capability(double s_mva, double p_mw) {
  if (!(s_mva >= 0.0 && p_mw >= 0.0)) throw ConfigError("apparent and active power must be non-negative");
  if (s_mva < p_mw) throw ConfigError("apparent power rating below active power");
  return std::sqrt(s_mva * s_mva - p_mw * p_mw);
}

double bisect_capability(double lo, double hi, double resolution, const std::function<bool(double)>& pass) {
  if (!(resolution > 0.0)) throw ConfigError("search resolution must be positive");
  if (pass(hi)) return hi;
  double good = lo, bad = hi;
  while (bad - good > resolution) {
    const double mid = 0.5 * (good + bad);
    (pass(mid) ? good : bad) = mid;
  }
  return good;
}

double fcr_reserve(const PlantSimulator& sim, std::size_t i, unit::Mode mode) {
  const auto& q = sim.config().qualification;
  const auto& ctl = sim.control();
  const auto& u = sim.unit(i);
  const double fn = u.nominal_frequency_hz;
  if (mode == unit::Mode::Pump) {
    const auto& r = pump_range(sim, i);
    const double droop = q.fcr_step_hz * r.max_mw / (ctl.pump_permanent_droop * fn);
    return std::min(droop, r.span() / 2.0);
  }
  const auto r = sim.turbine_range(i);
  const double droop = q.fcr_step_hz * u.rated_power_mw / (ctl.permanent_droop * fn);
  return std::min(droop, r.span() / 2.0);
}

TestRun run_fcr_test(const PlantSimulator& sim, TestMode mode, double direction) {
  auto o = fcr_once(sim, mode, direction, std::vector<double>(fcr_slots(sim, mode).size(), 1.0));
  return {std::move(o.report), std::move(o.trace)};
}

TestRun run_fcr(const PlantSimulator& sim, TestMode mode) {
  const auto& q = sim.config().qualification;
  const auto slots = fcr_slots(sim, mode);
  TestRun out;
  out.report = base_report(sim, "FCR", mode);
  std::vector<double> unit_cap(slots.size(), 1e300);
  double cap = 1e300;
  for (const double dir : {1.0, -1.0}) {
    const std::string tag = dir > 0 ? "under-frequency" : "over-frequency";
    std::vector<double> scale(slots.size(), 1.0);
    FcrOutcome o;
    try {
      o = fcr_once(sim, mode, dir, scale);
      // Units that fail get the largest reserve share that still meets the
      // envelope, the others keep theirs.
      for (std::size_t j = 0; j < slots.size(); ++j) {
        if (o.unit_pass[j] && (o.report.pass || slots.size() > 1)) continue;
        const bool fixed_pump = slots[j].mode == unit::Mode::Pump && !sim.stack().variable_speed();
        if (fixed_pump || !(slots[j].reserve > 0.0)) {
          scale[j] = 0.0;
          continue;
        }
        const double res = q.search_resolution_pu * sim.unit(slots[j].unit).rated_power_mw / slots[j].reserve;
        scale[j] = bisect_capability(0.0, 1.0, res, [&](double x) {
          if (x <= 0.0) return false;
          auto trial = scale;
          trial[j] = x;
          try {
            const auto r = fcr_once(sim, mode, dir, trial);
            return r.unit_pass[j] && r.report.pass;
          } catch (const SimulationError&) {
            return false;
          }
        });
        o.report.notes.push_back(std::string(slots[j].mode == unit::Mode::Pump ? "pump" : "turbine") +
                                 " reserve reduced to share " + std::to_string(round3(scale[j])));
      }
      if (scale != std::vector<double>(slots.size(), 1.0) &&
          std::any_of(scale.begin(), scale.end(), [](double x) { return x > 0.0; })) {
        auto notes = o.report.notes;
        auto reduced = fcr_once(sim, mode, dir, scale);
        if (reduced.report.pass) {
          o = std::move(reduced);
          o.report.notes.insert(o.report.notes.begin(), notes.begin(), notes.end());
        }
      }
    } catch (const SimulationError& e) {
      o.report = base_report(sim, "FCR", mode);
      o.report.add({e.time_s(), "simulation", 0.0, 0.0});
      o.report.notes.push_back(e.what());
      o.unit_capability.assign(slots.size(), 0.0);
    }
    merge(out.report, o.report, tag);
    cap = std::min(cap, o.report.capability_mw);
    for (std::size_t j = 0; j < slots.size(); ++j) unit_cap[j] = std::min(unit_cap[j], o.unit_capability[j]);
    if (dir > 0) out.trace = std::move(o.trace);
  }
  out.report.finalize();
  if (mode == TestMode::Hsc) {
    out.report.metrics["turbine_mw"] = round3(unit_cap[0]);
    out.report.metrics["pump_mw"] = round3(unit_cap[1]);
    cap = unit_cap[0] + unit_cap[1];
  }
  out.report.capability_mw = round3(std::max(cap, 0.0));
  return out;
}

TestRun run_afrr_test(const PlantSimulator& sim, TestMode mode, double direction) {
  return afrr_once(sim, mode, direction, nullptr);
}

TestRun run_afrr(const PlantSimulator& sim, TestMode mode) {
  TestRun out;
  out.report = base_report(sim, "aFRR", mode);
  double cap = 1e300;
  std::vector<double> pr;
  bool all_pass = true;
  for (const double dir : {1.0, -1.0}) {
    const std::string tag = dir > 0 ? "loading" : "unloading";
    TestRun r;
    pr.clear();
    try {
      r = afrr_once(sim, mode, dir, &pr);
    } catch (const SimulationError& e) {
      r.report = base_report(sim, "aFRR", mode);
      r.report.add({e.time_s(), "simulation", 0.0, 0.0});
      r.report.notes.push_back(e.what());
    }
    all_pass &= r.report.pass;
    merge(out.report, r.report, tag);
    cap = std::min(cap, r.report.capability_mw);
    if (dir > 0) out.trace = std::move(r.trace);
  }
  out.report.finalize();
  if (mode == TestMode::Hsc) {
    out.report.metrics["turbine_mw"] = all_pass ? round3(pr[0]) : 0.0;
    out.report.metrics["pump_mw"] = all_pass ? round3(pr[1]) : 0.0;
  }
  out.report.capability_mw = round3(std::max(cap, 0.0));
  return out;
}

TestRun run_ffr_test(const PlantSimulator& sim, TestMode mode, double capacity, double n0) {
  const auto& q = sim.config().qualification;
  const auto& ctl = sim.control();
  TestRun run;
  run.report = base_report(sim, "FFR", mode);
  run.report.metrics["capacity_mw"] = round3(capacity);
  if (!sim.stack().variable_speed()) {
    run.report.notes.push_back("fixed-speed units contribute synchronous inertia, not converter FFR");
    run.report.add({0.0, "technology", 0.0, 0.0});
    return run;
  }
  const double settle = q.fcr_settle_s;
  const double fn = sim.unit(0).nominal_frequency_hz;
  auto sc = make_scenario(sim, settle + q.ffr_observe_s);
  sc.frequency_hz = [=](double t) { return t < settle - 1e-9 ? fn : q.ffr_step_hz; };
  const bool pump = mode == TestMode::Pump;
  const std::size_t i = kTurbineUnit;
  if (pump) {
    sc.units[i] = pump_program(sim, i, 0.0);
  } else {
    const auto r = sim.turbine_range(i);
    const double p0 = r.max_mw - 1.2 * capacity;
    if (p0 < r.min_mw - 1e-9) {
      run.report.add({0.0, "initial_power", p0, r.min_mw});
      return run;
    }
    sc.units[i] = turbine_program(sim, i, p0);
    if (mode == TestMode::Hsc) sc.units[kPumpUnit] = pump_program(sim, kPumpUnit, 0.0);
  }
  sc.units[i].n0_rpm = n0;
  sc.units[i].strategy_switch = false;
  control::FfrParams fp;
  fp.activation_level_hz = q.ffr.activation_level_hz;
  fp.full_activation_s = ctl.ffr_ramp_s;
  fp.deactivation_rate_mw_s = ctl.ffr_deactivation_mw_s;
  fp.capacity_mw = capacity;
  fp.support = q.ffr.support_min_s > 5.0 ? control::FfrSupport::Long : control::FfrSupport::Short;
  sc.units[i].ffr = fp;
  try {
    run.trace = sim.run(sc);
  } catch (const SimulationError& e) {
    run.report.add({e.time_s(), "simulation", 0.0, 0.0});
    run.report.notes.push_back(e.what());
    return run;
  } catch (const InfeasibleError& e) {
    run.report.add({0.0, "initial_point", 0.0, 0.0});
    run.report.notes.push_back(e.what());
    return run;
  }
  const auto k0 = index_of(run.trace, settle) - 1;
  const auto t = window_time(run.trace, k0);
  const auto dp = window_delta(run.trace.units[i].p_mw, k0, 1.0);
  auto r = check_ffr_envelope(t, dp, capacity, q.ffr);
  for (const auto& v : r.violations) run.report.violations.push_back(v);
  for (const auto& [k, v] : r.metrics) run.report.metrics[k] = round3(v);
  speed_within_limits(sim, run.trace, i, &run.report);
  run.report.metrics["n_min_rpm"] = round3(run.trace.units[i].n_min_rpm);
  run.report.metrics["n_max_rpm"] = round3(run.trace.units[i].n_max_rpm);
  run.report.metrics["initial_speed_rpm"] = round3(run.trace.units[i].n_rpm.front());
  run.report.finalize();
  run.report.capability_mw = run.report.pass ? capacity : 0.0;
  return run;
}

TestRun run_ffr(const PlantSimulator& sim, TestMode mode, double n0) {
  const auto& q = sim.config().qualification;
  if (mode == TestMode::Hsc) {
    auto t = run_ffr(sim, TestMode::Turbine, n0);
    auto p = run_ffr(sim, TestMode::Pump, n0);
    t.report.mode = to_string(TestMode::Hsc);
    t.report.metrics.clear();
    merge(t.report, p.report, "pump");
    t.report.metrics["turbine_mw"] = t.report.capability_mw;
    t.report.metrics["pump_mw"] = p.report.capability_mw;
    t.report.capability_mw = round3(t.report.capability_mw + p.report.capability_mw);
    t.report.finalize();
    t.report.pass = t.report.violations.empty();
    return t;
  }
  const double rated = sim.unit(0).rated_power_mw;
  double hi = rated;
  if (mode == TestMode::Turbine) hi = sim.turbine_range(0).span() / 1.2;
  const double res = q.search_resolution_pu * rated;
  const double cap = bisect_capability(0.0, hi, res, [&](double c) {
    return c > 0.0 && run_ffr_test(sim, mode, c, n0).report.pass;
  });
  if (cap > 0.0) {
    auto run = run_ffr_test(sim, mode, cap, n0);
    run.report.metrics["search_resolution_mw"] = round3(res);
    run.report.capability_mw = round3(cap);
    return run;
  }
  auto run = run_ffr_test(sim, mode, res, n0);
  run.report.notes.push_back("no compliant capacity above the search resolution");
  run.report.capability_mw = 0.0;
  run.report.pass = false;
  if (run.report.violations.empty()) run.report.add({0.0, "capacity", 0.0, res});
  return run;
}

TestRun run_black_start_test(const PlantSimulator& sim, double load, double n0) {
  const auto& q = sim.config().qualification;
  const auto& u = sim.unit(0);
  TestRun run;
  run.report = base_report(sim, "black start", TestMode::Turbine);
  run.report.metrics["load_mw"] = round3(load);
  const bool vs = sim.stack().variable_speed();
  if (vs && !u.grid_forming_capable) {
    run.report.notes.push_back("converter is not grid forming");
    run.report.add({0.0, "grid_forming", 0.0, 1.0});
    return run;
  }
  const double t_load = 1.0;
  auto sc = make_scenario(sim, t_load + q.black_start_observe_s);
  UnitProgram p;
  p.online = true;
  p.mode = unit::Mode::SpeedNoLoad;
  p.islanded = true;
  p.n0_rpm = n0;
  p.load_mw = [=](double t) { return t < t_load - 1e-9 ? 0.0 : load; };
  sc.units[0] = p;
  try {
    run.trace = sim.run(sc);
  } catch (const SimulationError& e) {
    run.report.add({e.time_s(), "simulation", 0.0, 0.0});
    run.report.notes.push_back(e.what());
    return run;
  }
  const auto& ut = run.trace.units[0];
  run.report.metrics["n_min_rpm"] = round3(ut.n_min_rpm);
  run.report.metrics["n_max_rpm"] = round3(ut.n_max_rpm);
  if (vs) {
    speed_within_limits(sim, run.trace, 0, &run.report);
  } else {
    const double f_min = *std::min_element(run.trace.f_hz.begin(), run.trace.f_hz.end());
    run.report.metrics["f_min_hz"] = round3(f_min);
    if (f_min < q.black_start_frequency_floor_hz) {
      const auto k = static_cast<std::size_t>(
          std::min_element(run.trace.f_hz.begin(), run.trace.f_hz.end()) - run.trace.f_hz.begin());
      run.report.add({run.trace.t[k], "frequency", f_min, q.black_start_frequency_floor_hz});
    }
  }
  run.report.finalize();
  run.report.capability_mw = run.report.pass ? load : 0.0;
  return run;
}

TestRun black_start_capacity_at(const PlantSimulator& sim, double n0) {
  const auto& q = sim.config().qualification;
  const double rated = sim.unit(0).rated_power_mw;
  const double res = q.search_resolution_pu * rated;
  const double cap = bisect_capability(0.0, rated, res, [&](double l) {
    return l <= 0.0 || run_black_start_test(sim, l, n0).report.pass;
  });
  auto run = run_black_start_test(sim, cap, n0);
  run.report.metrics["search_resolution_mw"] = round3(res);
  if (cap < res) {
    run.report.notes.push_back("capability below the search resolution");
    run.report.capability_mw = 0.0;
    run.report.pass = false;
    if (run.report.violations.empty()) run.report.add({0.0, "capacity", cap, res});
  } else {
    run.report.capability_mw = round3(cap);
  }
  return run;
}

TestRun black_start_capacity(const PlantSimulator& sim) {
  const auto& q = sim.config().qualification;
  if (!sim.stack().variable_speed()) return black_start_capacity_at(sim, 0.0);
  std::vector<double> speeds = q.black_start_speeds_rpm;
  if (speeds.empty()) speeds.push_back(sim.unit(0).speed_range.middle_rpm);
  TestRun first;
  std::map<std::string, double> per_speed;
  double best = 0.0, best_n = speeds.front();
  for (std::size_t k = 0; k < speeds.size(); ++k) {
    auto r = black_start_capacity_at(sim, speeds[k]);
    char key[48];
    std::snprintf(key, sizeof key, "capacity_at_%.1f_rpm", speeds[k]);
    per_speed[key] = r.report.capability_mw;
    if (r.report.capability_mw > best) {
      best = r.report.capability_mw;
      best_n = speeds[k];
    }
    if (k == 0) first = std::move(r);
  }
  for (const auto& [k, v] : per_speed) first.report.metrics[k] = v;
  first.report.metrics["best_capacity_mw"] = best;
  first.report.metrics["best_speed_rpm"] = best_n;
  return first;
}

namespace {

TestRun inertia_run(const PlantSimulator& sim, TestMode mode, bool emulation, const std::string& service) {
  const auto& q = sim.config().qualification;
  const auto& u = sim.unit(0);
  const double fn = u.nominal_frequency_hz;
  const double t0 = 1.0;
  const double rocof = -std::abs(q.inertia_rocof_hz_s);
  const double ramp = q.inertia_ramp_s;
  auto sc = make_scenario(sim, t0 + ramp + 4.0);
  sc.frequency_hz = [=](double t) { return fn + rocof * std::clamp(t - t0, 0.0, ramp); };
  const bool pump = mode == TestMode::Pump;
  UnitProgram p = pump ? pump_program(sim, 0, -pump_range(sim, 0).mid())
                       : turbine_program(sim, 0, sim.turbine_range(0).mid());
  p.inertia_emulation = emulation;
  p.strategy_switch = false;
  sc.units[0] = p;
  const double expected = inertial_power(u.tau_m_s, u.rated_power_mw, rocof, fn);
  TestRun run;
  run.report = base_report(sim, service, mode);
  run.trace = sim.run(sc);
  const auto& pw = run.trace.units[0].p_mw;
  const double p0 = pw.front();
  double peak = 0.0;
  for (std::size_t k = 0; k < pw.size(); ++k) {
    if (run.trace.t[k] <= t0 + ramp + 0.5) peak = std::max(peak, pw[k] - p0);
  }
  run.report.metrics["expected_mw"] = round3(expected);
  run.report.metrics["peak_mw"] = round3(peak);
  if (std::abs(peak - expected) > q.inertia_tolerance * std::abs(expected)) {
    run.report.add({t0 + ramp, "peak_power", peak, expected});
  }
  run.report.finalize();
  run.report.capability_mw = round3(peak);
  return run;
}

}  // namespace

TestRun synchronous_inertia_test(const PlantSimulator& sim, TestMode mode) {
  if (sim.stack().variable_speed()) {
    TestRun run;
    run.report = base_report(sim, "synchronous inertia", mode);
    run.report.notes.push_back("rotor speed is decoupled from the grid frequency");
    run.report.add({0.0, "technology", 0.0, 0.0});
    return run;
  }
  return inertia_run(sim, mode == TestMode::Hsc ? TestMode::Turbine : mode, false, "synchronous inertia");
}

TestRun synthetic_inertia_test(const PlantSimulator& sim, TestMode mode, bool emulation) {
  if (!sim.stack().variable_speed()) {
    TestRun run;
    run.report = base_report(sim, "synthetic inertia", mode);
    run.report.notes.push_back("fixed-speed units have no converter to emulate inertia");
    run.report.add({0.0, "technology", 0.0, 0.0});
    return run;
  }
  return inertia_run(sim, mode == TestMode::Hsc ? TestMode::Turbine : mode, emulation, "synthetic inertia");
}

}  // namespace hydroflex::qualification
