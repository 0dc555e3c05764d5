#include "hydroflex/plant/config.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hydroflex/errors.hpp"
#include "hydroflex/plant/stack.hpp"

namespace hydroflex::plant {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

class Section {
 public:
  Section(const YAML::Node& n, std::string path) : n_(n), path_(std::move(path)) {
    if (!n.IsMap()) throw ConfigError(path_ + ": expected a mapping", line_of(n));
  }
  ~Section() = default;

  bool has(const std::string& key) const { return n_[key].IsDefined() && !n_[key].IsNull(); }

  YAML::Node node(const std::string& key) {
    used_.insert(key);
    const YAML::Node v = n_[key];
    if (!v.IsDefined() || v.IsNull()) throw ConfigError(path_ + ": missing key '" + key + "'", line_of(n_));
    return v;
  }

  template <class T>
  T req(const std::string& key) {
    return as<T>(node(key), key);
  }

  template <class T>
  T opt(const std::string& key, T fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return as<T>(n_[key], key);
  }

  Section sub(const std::string& key) { return Section(node(key), path_ + "." + key); }

  std::optional<unit::PowerRange> range(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    const YAML::Node v = n_[key];
    if (!v.IsSequence() || v.size() != 2) throw ConfigError(path_ + "." + key + ": expected [min, max]", line_of(v));
    return unit::PowerRange{as<double>(v[0], key), as<double>(v[1], key)};
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& kv : n_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'", line_of(kv.first));
    }
  }

  const std::string& path() const { return path_; }
  const YAML::Node& yaml() const { return n_; }

 private:
  template <class T>
  T as(const YAML::Node& v, const std::string& key) const {
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path_ + "." + key + ": invalid value", line_of(v));
    }
  }

  YAML::Node n_;
  std::string path_;
  std::set<std::string> used_;
};

hydraulic::PortRef parse_port(const std::string& text) {
  const auto dot = text.rfind('.');
  if (dot != std::string::npos) {
    const auto suffix = text.substr(dot + 1);
    if (suffix == "upstream") return {text.substr(0, dot), hydraulic::Port::Upstream};
    if (suffix == "downstream") return {text.substr(0, dot), hydraulic::Port::Downstream};
  }
  return {text, hydraulic::Port::Single};
}

hydraulic::Element parse_element(Section s) {
  const auto id = s.req<std::string>("id");
  const auto type = s.req<std::string>("type");
  hydraulic::Element e;
  if (type == "reservoir") {
    e = hydraulic::Reservoir{id, s.opt<double>("elevation_m", 0.0)};
  } else if (type == "pipe") {
    e = hydraulic::Pipe{id, s.req<double>("length_m"), s.req<double>("diameter_m"), s.req<double>("wave_speed_ms"),
                        s.opt<double>("friction_factor", 0.0), s.opt<int>("n_segments", 1)};
  } else if (type == "surge_tank") {
    e = hydraulic::SurgeTank{id,
                             s.req<double>("cross_section_m2"),
                             s.req<double>("base_elevation_m"),
                             s.req<double>("min_level_m"),
                             s.req<double>("max_level_m"),
                             s.opt<double>("throttle_loss", 0.0)};
  } else if (type == "valve") {
    hydraulic::Valve v{id, s.req<double>("discharge_coefficient"), s.opt<double>("opening", 1.0), std::nullopt};
    if (s.has("outlet_head_m")) v.outlet_head_m = s.req<double>("outlet_head_m");
    e = v;
  } else if (type == "machine") {
    e = hydraulic::MachineNode{id};
  } else {
    throw ConfigError(s.path() + ": unknown element type '" + type + "'", line_of(s.yaml()));
  }
  s.finish();
  return e;
}

control::GovernorParams parse_governor(Section s) {
  control::GovernorParams g;
  g.kp = s.opt("kp", g.kp);
  g.ki = s.opt("ki", g.ki);
  g.kd = s.opt("kd", g.kd);
  g.derivative_filter_s = s.opt("derivative_filter_s", g.derivative_filter_s);
  g.servo_time_constant_s = s.opt("servo_time_constant_s", g.servo_time_constant_s);
  g.rate_open_pu_s = s.opt("rate_open_pu_s", g.rate_open_pu_s);
  g.rate_close_pu_s = s.opt("rate_close_pu_s", g.rate_close_pu_s);
  g.y_min = s.opt("y_min", g.y_min);
  g.y_max = s.opt("y_max", g.y_max);
  s.finish();
  return g;
}

ControlConfig parse_control(Section s) {
  ControlConfig c;
  if (s.has("power_governor")) c.power_governor = parse_governor(s.sub("power_governor"));
  if (s.has("speed_governor")) c.speed_governor = parse_governor(s.sub("speed_governor"));
  if (s.has("island_governor")) c.island_governor = parse_governor(s.sub("island_governor"));
  c.permanent_droop = s.opt("permanent_droop", c.permanent_droop);
  c.pump_permanent_droop = s.opt("pump_permanent_droop", c.pump_permanent_droop);
  c.fcr_deadband_hz = s.opt("fcr_deadband_hz", c.fcr_deadband_hz);
  c.fcr_ramp_mw_s = s.opt("fcr_ramp_mw_s", c.fcr_ramp_mw_s);
  c.afrr_ramp_limit_mw_s = s.opt("afrr_ramp_limit_mw_s", c.afrr_ramp_limit_mw_s);
  c.rocof_window_s = s.opt("rocof_window_s", c.rocof_window_s);
  c.ffr_ramp_s = s.opt("ffr_ramp_s", c.ffr_ramp_s);
  c.ffr_deactivation_mw_s = s.opt("ffr_deactivation_mw_s", c.ffr_deactivation_mw_s);
  c.switch_hysteresis = s.opt("switch_hysteresis", c.switch_hysteresis);
  c.switch_gain_pu = s.opt("switch_gain_pu", c.switch_gain_pu);
  c.switch_horizon_s = s.opt("switch_horizon_s", c.switch_horizon_s);
  c.pump_opening = s.opt("pump_opening", c.pump_opening);
  c.speed_power_feedforward = s.opt("speed_power_feedforward", c.speed_power_feedforward);
  s.finish();
  return c;
}

unit::UnitConfig parse_unit(Section s) {
  unit::UnitConfig u;
  u.id = s.req<std::string>("id");
  u.machine_node = s.req<std::string>("machine_node");
  u.technology = unit::technology_from_string(s.opt<std::string>("technology", "fixed"));
  u.rated_power_mw = s.req<double>("rated_power_mw");
  u.rated_apparent_power_mva = s.req<double>("rated_apparent_power_mva");
  u.tau_m_s = s.req<double>("tau_m_s");
  u.synchronous_speed_rpm = s.req<double>("synchronous_speed_rpm");
  u.nominal_frequency_hz = s.opt("nominal_frequency_hz", u.nominal_frequency_hz);
  if (s.has("speed_range_rpm")) {
    auto r = s.sub("speed_range_rpm");
    u.speed_range = {r.req<double>("min"), r.req<double>("middle"), r.req<double>("max")};
    r.finish();
  }
  {
    auto h = s.sub("head_range_m");
    u.head_min_m = h.req<double>("min");
    u.head_max_m = h.req<double>("max");
    h.finish();
  }
  auto tr = s.range("turbine_range_mw");
  if (!tr) throw ConfigError(s.path() + ": missing key 'turbine_range_mw'", line_of(s.yaml()));
  u.turbine_range = *tr;
  u.pump_range = s.range("pump_range_mw");
  u.pump_range_alternative = s.range("pump_range_alternative_mw");
  u.spps_extended_range = s.range("spps_extended_range_mw");
  u.grid_forming_capable = s.opt("grid_forming_capable", false);
  u.specific_speed = s.opt("specific_speed", 0.0);
  u.transient_speed_margin = s.opt("transient_speed_margin", u.transient_speed_margin);
  u.stall_fraction = s.opt("stall_fraction", u.stall_fraction);
  u.converter_lag_s = s.opt("converter_lag_s", u.converter_lag_s);
  u.converter_rating_mw = s.opt("converter_rating_mw", u.converter_rating_mw);
  s.finish();
  return u;
}

void parse_qualification(Section s, QualificationConfig& q) {
  if (s.has("fcr")) {
    auto f = s.sub("fcr");
    q.fcr.e_v = f.opt("e_v", q.fcr.e_v);
    q.fcr.initial_response_fraction = f.opt("initial_response_fraction", q.fcr.initial_response_fraction);
    q.fcr.t_i_max_s = f.opt("t_i_max_s", q.fcr.t_i_max_s);
    q.fcr.t_r_max_s = f.opt("t_r_max_s", q.fcr.t_r_max_s);
    q.fcr.reach_tolerance = f.opt("reach_tolerance", q.fcr.reach_tolerance);
    q.fcr.hold_s = f.opt("hold_s", q.fcr.hold_s);
    q.fcr_step_hz = f.opt("step_hz", q.fcr_step_hz);
    q.fcr_settle_s = f.opt("settle_s", q.fcr_settle_s);
    f.finish();
  }
  if (s.has("afrr")) {
    auto a = s.sub("afrr");
    q.afrr.e_v = a.opt("e_v", q.afrr.e_v);
    q.afrr.t_b_s = a.opt("t_b_s", q.afrr.t_b_s);
    q.afrr.t_i_max_s = a.opt("t_i_max_s", q.afrr.t_i_max_s);
    q.afrr.t_end_s = a.opt("t_end_s", q.afrr.t_end_s);
    q.afrr.filter_time_constant_s = a.opt("filter_time_constant_s", q.afrr.filter_time_constant_s);
    q.afrr_ramp_s = a.opt("ramp_s", q.afrr_ramp_s);
    a.finish();
  }
  if (s.has("ffr")) {
    auto f = s.sub("ffr");
    q.ffr.activation_level_hz = f.opt("activation_level_hz", q.ffr.activation_level_hz);
    q.ffr.full_activation_max_s = f.opt("full_activation_max_s", q.ffr.full_activation_max_s);
    q.ffr.support_min_s = f.opt("support_min_s", q.ffr.support_min_s);
    q.ffr.over_delivery_max = f.opt("over_delivery_max", q.ffr.over_delivery_max);
    q.ffr.cycle_max_s = f.opt("cycle_max_s", q.ffr.cycle_max_s);
    q.ffr.reach_tolerance = f.opt("reach_tolerance", q.ffr.reach_tolerance);
    q.ffr_step_hz = f.opt("step_hz", q.ffr_step_hz);
    q.ffr_observe_s = f.opt("observe_s", q.ffr_observe_s);
    f.finish();
  }
  if (s.has("black_start")) {
    auto b = s.sub("black_start");
    q.black_start_frequency_floor_hz = b.opt("frequency_floor_hz", q.black_start_frequency_floor_hz);
    q.black_start_observe_s = b.opt("observe_s", q.black_start_observe_s);
    if (b.has("initial_speeds_rpm")) q.black_start_speeds_rpm = b.req<std::vector<double>>("initial_speeds_rpm");
    b.finish();
  }
  if (s.has("inertia")) {
    auto i = s.sub("inertia");
    q.inertia_rocof_hz_s = i.opt("rocof_hz_s", q.inertia_rocof_hz_s);
    q.inertia_ramp_s = i.opt("ramp_s", q.inertia_ramp_s);
    q.inertia_tolerance = i.opt("tolerance", q.inertia_tolerance);
    i.finish();
  }
  q.search_resolution_pu = s.opt("search_resolution_pu", q.search_resolution_pu);
  s.finish();
}

}  // namespace

PlantConfig parse_plant_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ": " + e.msg, e.mark.line + 1);
  }
  PlantConfig cfg;
  cfg.source_path = origin;
  Section top(root, origin);

  {
    auto p = top.sub("plant");
    cfg.name = p.req<std::string>("name");
    cfg.demonstrator = p.opt<std::string>("demonstrator", cfg.name);
    p.finish();
  }
  if (top.has("solver")) {
    auto s = top.sub("solver");
    cfg.solver.dt_s = s.opt("dt_s", cfg.solver.dt_s);
    cfg.solver.max_iterations = s.opt("max_iterations", cfg.solver.max_iterations);
    cfg.solver.tolerance = s.opt("tolerance", cfg.solver.tolerance);
    s.finish();
  }
  {
    auto w = top.sub("waterway");
    cfg.upper_reservoir = w.req<std::string>("upper_reservoir");
    cfg.lower_reservoir = w.req<std::string>("lower_reservoir");
    cfg.lower_elevation_m = w.req<double>("lower_elevation_m");
    const auto elements = w.node("elements");
    if (!elements.IsSequence()) throw ConfigError("waterway.elements: expected a list", line_of(elements));
    for (std::size_t i = 0; i < elements.size(); ++i) {
      cfg.network.elements.push_back(parse_element(Section(elements[i], "waterway.elements[" + std::to_string(i) + "]")));
    }
    const auto junctions = w.node("junctions");
    if (!junctions.IsSequence()) throw ConfigError("waterway.junctions: expected a list", line_of(junctions));
    for (std::size_t i = 0; i < junctions.size(); ++i) {
      Section j(junctions[i], "waterway.junctions[" + std::to_string(i) + "]");
      hydraulic::Junction jn;
      jn.id = j.req<std::string>("id");
      for (const auto& p : j.req<std::vector<std::string>>("ports")) jn.ports.push_back(parse_port(p));
      j.finish();
      cfg.network.junctions.push_back(std::move(jn));
    }
    w.finish();
  }
  {
    auto m = top.sub("machine");
    cfg.machine.characteristic = m.req<std::string>("characteristic");
    cfg.machine.base.speed_rpm = m.req<double>("rated_speed_rpm");
    cfg.machine.base.head_m = m.req<double>("rated_head_m");
    cfg.machine.base.discharge_m3s = m.req<double>("rated_discharge_m3s");
    cfg.machine.base.power_w = m.req<double>("rated_power_mw") * 1e6;
    cfg.machine.specific_speed = m.opt("specific_speed", 0.0);
    m.finish();
  }
  {
    const auto units = top.node("units");
    if (!units.IsSequence() || units.size() == 0) throw ConfigError("units: expected a non-empty list", line_of(units));
    for (std::size_t i = 0; i < units.size(); ++i) {
      cfg.units.push_back(parse_unit(Section(units[i], "units[" + std::to_string(i) + "]")));
    }
  }
  if (top.has("controls")) {
    auto c = top.sub("controls");
    if (c.has("fixed")) cfg.fixed_control = parse_control(c.sub("fixed"));
    if (c.has("variable")) cfg.variable_control = parse_control(c.sub("variable"));
    c.finish();
  }
  if (top.has("bess")) {
    auto b = top.sub("bess");
    unit::Bess bess;
    bess.rated_power_mw = b.req<double>("rated_power_mw");
    bess.energy_capacity_mwh = b.req<double>("energy_capacity_mwh");
    bess.soc = b.opt("soc", 0.5);
    bess.response_time_constant_s = b.opt("response_time_constant_s", 0.0);
    b.finish();
    cfg.bess = bess;
  }
  if (top.has("hbh")) {
    auto h = top.sub("hbh");
    cfg.hbh.split_time_constant_s = h.opt("split_time_constant_s", cfg.hbh.split_time_constant_s);
    cfg.hbh.turbine_deadband_hz = h.opt("turbine_deadband_hz", cfg.hbh.turbine_deadband_hz);
    cfg.hbh.soc_gain_pu = h.opt("soc_gain_pu", cfg.hbh.soc_gain_pu);
    cfg.hbh.soc_target = h.opt("soc_target", cfg.hbh.soc_target);
    h.finish();
  }
  if (top.has("qualification")) parse_qualification(top.sub("qualification"), cfg.qualification);
  cfg.scoring = matrix::default_scoring();
  if (top.has("scoring")) {
    auto s = top.sub("scoring");
    for (auto svc : matrix::kServices) {
      if (s.has(matrix::service_id(svc))) cfg.scoring.reference_mw[svc] = s.req<double>(matrix::service_id(svc));
    }
    s.finish();
  }
  if (top.has("stacks")) cfg.stacks = top.req<std::vector<std::string>>("stacks");
  top.finish();
  return cfg;
}

PlantConfig load_plant_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plant file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plant_config(ss.str(), path);
}

std::shared_ptr<const unit::Characteristic> load_characteristic(const PlantConfig& cfg) {
  if (cfg.machine.characteristic == "synthetic") {
    return std::make_shared<const unit::Characteristic>(unit::synthetic_pump_turbine());
  }
  std::filesystem::path p(cfg.machine.characteristic);
  if (p.is_relative() && !cfg.source_path.empty() && cfg.source_path.front() != '<') {
    p = std::filesystem::path(cfg.source_path).parent_path() / p;
  }
  return std::make_shared<const unit::Characteristic>(unit::Characteristic::load_csv(p.string()));
}

std::vector<std::string> validate_plant_config(const PlantConfig& cfg) {
  std::vector<std::string> d;
  auto keep = [&](const std::vector<std::string>& more) { d.insert(d.end(), more.begin(), more.end()); };
  try {
    hydraulic::HydraulicNetwork net(cfg.network, cfg.solver);
    net.reservoir_index(cfg.upper_reservoir);
    net.reservoir_index(cfg.lower_reservoir);
    std::set<std::string> nodes;
    for (const auto& u : cfg.units) {
      net.machine_index(u.machine_node);
      if (!nodes.insert(u.machine_node).second) d.push_back("machine node '" + u.machine_node + "' used by two units");
    }
  } catch (const ConfigError& e) {
    d.push_back(std::string("waterway: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& u : cfg.units) {
    keep(u.validate());
    if (!ids.insert(u.id).second) d.push_back("duplicate unit id '" + u.id + "'");
  }
  if (!(cfg.machine.base.speed_rpm > 0 && cfg.machine.base.head_m > 0 && cfg.machine.base.discharge_m3s > 0 &&
        cfg.machine.base.power_w > 0)) {
    d.push_back("machine: rated base values must be positive");
  }
  try {
    auto table = load_characteristic(cfg);
    if (!table->monotone_in_opening()) d.push_back("machine: characteristic discharge not monotone in opening");
    for (const auto& u : cfg.units) {
      if (u.pump_range && table->quadrants() != 4) {
        d.push_back("unit '" + u.id + "': pump range needs a 4-quadrant characteristic");
      }
    }
  } catch (const ConfigError& e) {
    d.push_back(std::string("machine: ") + e.what());
  }
  for (const auto* c : {&cfg.fixed_control, &cfg.variable_control}) {
    if (!(c->permanent_droop > 0.0)) d.push_back("controls: permanent_droop must be positive");
    if (!(c->pump_permanent_droop > 0.0)) d.push_back("controls: pump_permanent_droop must be positive");
    if (!(c->rocof_window_s >= 0.0)) d.push_back("controls: rocof_window_s must be non-negative");
    if (!(c->ffr_ramp_s > 0.0)) d.push_back("controls: ffr_ramp_s must be positive");
    if (!(c->ffr_deactivation_mw_s >= 0.0)) d.push_back("controls: ffr_deactivation_mw_s must be non-negative");
    std::vector<const control::GovernorParams*> govs{&c->power_governor, &c->speed_governor};
    if (c->island_governor) govs.push_back(&*c->island_governor);
    for (const auto* g : govs) {
      if (!(g->rate_open_pu_s > 0.0 && g->rate_close_pu_s > 0.0)) d.push_back("controls: governor rate limits must be positive");
      if (!(g->y_min < g->y_max)) d.push_back("controls: governor opening limits are empty");
    }
  }
  if (cfg.bess) {
    if (!(cfg.bess->rated_power_mw > 0.0)) d.push_back("bess: rated_power_mw must be positive");
    if (!(cfg.bess->energy_capacity_mwh > 0.0)) d.push_back("bess: energy_capacity_mwh must be positive");
    if (!(cfg.bess->soc >= 0.0 && cfg.bess->soc <= 1.0)) d.push_back("bess: soc outside [0, 1]");
  }
  if (!(cfg.hbh.split_time_constant_s > 0.0)) d.push_back("hbh: split_time_constant_s must be positive");
  keep(qualification::validate(cfg.qualification.fcr));
  keep(qualification::validate(cfg.qualification.afrr));
  keep(qualification::validate(cfg.qualification.ffr));
  if (!(cfg.qualification.afrr.t_end_s > cfg.qualification.afrr_ramp_s)) {
    d.push_back("qualification: aFRR T must exceed the ramp duration");
  }
  for (const auto& [svc, ref] : cfg.scoring.reference_mw) {
    if (!(ref > 0.0)) d.push_back(std::string("scoring: reference for ") + matrix::service_id(svc) + " must be positive");
  }
  for (const auto& s : cfg.stacks) {
    try {
      const auto st = parse_stack(s);
      if (st.hbh && !cfg.bess) d.push_back("stack '" + s + "' needs a bess section");
      if (st.hsc && cfg.units.size() < 2) d.push_back("stack '" + s + "' needs two units");
    } catch (const ConfigError& e) {
      d.push_back(e.what());
    }
  }
  return d;
}

std::vector<std::string> validate_plant_config(const std::string& path) {
  try {
    return validate_plant_config(load_plant_config(path));
  } catch (const ConfigError& e) {
    return {e.what()};
  }
}

}  // namespace hydroflex::plant
