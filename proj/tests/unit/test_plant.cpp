#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hydroflex/errors.hpp"
#include "hydroflex/io/report_io.hpp"
#include "hydroflex/plant/config.hpp"
#include "hydroflex/plant/simulator.hpp"
#include "hydroflex/qualification/tests.hpp"

using namespace hydroflex;
using namespace hydroflex::plant;
using namespace hydroflex::qualification;
namespace fs = std::filesystem;

namespace {

const std::string kConfig = (fs::path(HYDROFLEX_DATA_DIR) / "reference" / "frades_like.yaml").string();

const PlantConfig& reference() {
  static const PlantConfig cfg = load_plant_config(kConfig);
  return cfg;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) s.replace(p, from.size(), to);
  return s;
}

bool has_diagnostic(const std::vector<std::string>& d, const std::string& needle) {
  for (const auto& x : d) {
    if (x.find(needle) != std::string::npos) return true;
  }
  return false;
}

Scenario steady(const PlantSimulator& sim, double duration) {
  Scenario sc;
  sc.head_m = sim.head_min();
  sc.duration_s = duration;
  sc.units.resize(sim.unit_count());
  sc.units[0].online = true;
  sc.units[0].mode = unit::Mode::Turbine;
  sc.units[0].p0_mw = sim.turbine_range(0).mid();
  return sc;
}

}  // namespace

TEST(PlantConfig, ReferenceIsValid) {
  const auto& cfg = reference();
  EXPECT_TRUE(validate_plant_config(cfg).empty());
  EXPECT_GE(cfg.network.elements.size(), 8u);
  EXPECT_EQ(cfg.units.size(), 2u);
  EXPECT_EQ(cfg.stacks.size(), 6u);
  EXPECT_DOUBLE_EQ(cfg.units[0].pump_range->max_mw, 390.0);
  EXPECT_DOUBLE_EQ(cfg.units[0].pump_range_alternative->max_mw, 381.0);
  EXPECT_DOUBLE_EQ(cfg.qualification.afrr.t_b_s, 30.0);
}

TEST(PlantConfig, InvariantDiagnostics) {
  const auto text = io::read_text(kConfig);
  const auto bad_speed = parse_plant_config(replace_all(text, "middle: 365.5", "middle: 390.0"), kConfig);
  EXPECT_TRUE(has_diagnostic(validate_plant_config(bad_speed), "n_min < n_middle < n_max"));
  const auto bad_pump =
      parse_plant_config(replace_all(text, "pump_range_mw: [300.0, 390.0]", "pump_range_mw: [390.0, 300.0]"), kConfig);
  EXPECT_TRUE(has_diagnostic(validate_plant_config(bad_pump), "pump power range is empty"));
  const auto bad_pipe = parse_plant_config(replace_all(text, "length_m: 600", "length_m: -10"), kConfig);
  EXPECT_TRUE(has_diagnostic(validate_plant_config(bad_pipe), "waterway"));
}

TEST(PlantConfig, ErrorsCarryLineNumbers) {
  const auto text = io::read_text(kConfig);
  try {
    parse_plant_config(replace_all(text, "  name: frades_like", "  name: frades_like\n  colour: blue"), kConfig);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 8);
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  EXPECT_THROW(parse_plant_config("plant: [unclosed", "<inline>"), ConfigError);
  EXPECT_EQ(validate_plant_config("/nonexistent/plant.yaml").size(), 1u);
}

TEST(PlantConfig, StackParsing) {
  const auto s = parse_stack("VS (DFIM) & SPSS & HSC");
  EXPECT_EQ(s.technology, unit::Technology::Dfim);
  EXPECT_TRUE(s.spps);
  EXPECT_TRUE(s.hsc);
  EXPECT_FALSE(s.hbh);
  EXPECT_EQ(parse_stack("FS").technology, unit::Technology::Fixed);
  EXPECT_EQ(stack_slug("VS (DFIM) & SPSS & HSC"), "vs_dfim_spss_hsc");
  EXPECT_THROW(parse_stack("hamster wheel"), ConfigError);
}

TEST(PlantSim, SteadyStateIsQuiet) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  const auto tr = sim.run(steady(sim, 10.0));
  const auto& u = tr.units[0];
  for (std::size_t k = 0; k < tr.size(); ++k) {
    ASSERT_NEAR(u.p_mw[k], u.p_mw.front(), 1e-6);
    ASSERT_NEAR(u.n_rpm[k], u.n_rpm.front(), 1e-6);
  }
  EXPECT_NEAR(u.p_mw.front(), sim.turbine_range(0).mid(), 1e-6);
  EXPECT_NEAR(u.n_rpm.front(), 365.5, 1e-6);
}

TEST(PlantSim, FixedSpeedLock) {
  PlantSimulator sim(reference(), parse_stack("FS"));
  auto sc = steady(sim, 20.0);
  sc.frequency_hz = [](double t) { return 50.0 + 0.1 * std::sin(t); };
  const auto tr = sim.run(sc);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    ASSERT_LT(std::abs(tr.units[0].n_rpm[k] / 375.0 - tr.f_hz[k] / 50.0), 1e-9);
  }
}

TEST(PlantSim, VariableSpeedDecoupling) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  const auto base = sim.run(steady(sim, 20.0));
  auto sc = steady(sim, 20.0);
  sc.frequency_hz = [](double t) { return 50.0 - 0.3 * std::min(t, 3.0); };
  const auto moved = sim.run(sc);
  for (std::size_t k = 0; k < base.size(); ++k) ASSERT_EQ(moved.units[0].n_rpm[k], base.units[0].n_rpm[k]);
}

TEST(PlantSim, KineticEnergyAccounting) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  auto sc = steady(sim, 8.0);
  sc.units[0].offset_mw = [](double t) { return t < 1.0 ? 0.0 : 40.0; };
  sc.units[0].strategy_switch = false;
  const auto tr = sim.run(sc);
  const auto& u = tr.units[0];
  const double j = sim.unit(0).inertia_kgm2();
  const double w0 = unit::rpm_to_rad_s(u.n_rpm.front()), w1 = unit::rpm_to_rad_s(u.n_rpm.back());
  const double de = unit::kinetic_energy_j(j, w1) - unit::kinetic_energy_j(j, w0);
  double work = 0.0;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double a = u.p_mech_mw[k - 1] - u.p_mw[k - 1], b = u.p_mech_mw[k] - u.p_mw[k];
    work += 0.5 * (a + b) * 1e6 * (tr.t[k] - tr.t[k - 1]);
  }
  ASSERT_GT(std::abs(de), 1e6);
  EXPECT_NEAR(work, de, 1e-3 * std::abs(de));
}

TEST(PlantSim, StrategySwitchCatchesOverspeed) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  auto sc = steady(sim, 20.0);
  sc.units[0].n0_rpm = 381.0;
  sc.units[0].offset_mw = [](double t) { return t < 1.0 ? 0.0 : -120.0; };
  const auto tr = sim.run(sc);
  EXPECT_GE(tr.units[0].switch_activations, 1);
  EXPECT_LE(tr.units[0].n_max_rpm, sim.unit(0).transient_max_rpm());
}

TEST(PlantSim, Deterministic) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  const auto a = run_ffr_test(sim, TestMode::Turbine, 80.0);
  const auto b = run_ffr_test(sim, TestMode::Turbine, 80.0);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    ASSERT_EQ(a.trace.plant_mw[k], b.trace.plant_mw[k]);
    ASSERT_EQ(a.trace.units[0].n_rpm[k], b.trace.units[0].n_rpm[k]);
  }
  EXPECT_EQ(io::to_json(a.report).dump(), io::to_json(b.report).dump());
}

TEST(Qualification, InertiaArithmetic) {
  EXPECT_NEAR(inertial_power(7.9, 395.0, -1.0, 50.0), 62.4, 0.001 * 62.4);
  EXPECT_NEAR(voltvar_capability(420.0, 395.0), std::sqrt(420.0 * 420.0 - 395.0 * 395.0), 1e-12);
}

TEST(Qualification, InertiaEmulationMatchesSynchronousMachine) {
  PlantSimulator vs(reference(), parse_stack("VS (DFIM)"));
  PlantSimulator fs(reference(), parse_stack("FS"));
  const auto synth = synthetic_inertia_test(vs, TestMode::Turbine);
  const auto sync = synchronous_inertia_test(fs, TestMode::Turbine);
  EXPECT_TRUE(synth.report.pass);
  EXPECT_TRUE(sync.report.pass);
  auto energy = [](const Trace& tr) {
    double e = 0.0;
    const double p0 = tr.units[0].p_mw.front();
    for (std::size_t k = 1; k < tr.size(); ++k) {
      if (tr.t[k] > 2.5) break;
      e += (tr.units[0].p_mw[k] - p0) * (tr.t[k] - tr.t[k - 1]);
    }
    return e;
  };
  const double a = energy(synth.trace), b = energy(sync.trace);
  EXPECT_NEAR(a, b, 0.05 * std::abs(b));
  EXPECT_FALSE(synthetic_inertia_test(fs, TestMode::Turbine).report.pass);
}

TEST(Qualification, FcrBothDirections) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  const auto r = run_fcr(sim, TestMode::Turbine);
  EXPECT_TRUE(r.report.pass);
  const double up = r.report.metrics.at("under-frequency.turbine_sustained_mw");
  const double down = r.report.metrics.at("over-frequency.turbine_sustained_mw");
  EXPECT_NEAR(r.report.capability_mw, std::min(up, down), 1e-3);
}

TEST(Qualification, FixedSpeedPumpHasNoFcr) {
  PlantSimulator sim(reference(), parse_stack("FS"));
  const auto r = run_fcr(sim, TestMode::Pump);
  EXPECT_DOUBLE_EQ(r.report.capability_mw, 0.0);
  EXPECT_FALSE(r.report.pass);
}

TEST(Qualification, HscAdditivity) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM) & SPSS & HSC"));
  const auto r = run_fcr(sim, TestMode::Hsc);
  ASSERT_TRUE(r.report.pass);
  const double bands = fcr_reserve(sim, 0, unit::Mode::Turbine) + fcr_reserve(sim, 1, unit::Mode::Pump);
  for (const char* dir : {"under-frequency", "over-frequency"}) {
    EXPECT_NEAR(r.report.metrics.at(std::string(dir) + ".plant_sustained_mw"), bands, 0.01 * bands);
  }
  EXPECT_NEAR(r.report.capability_mw, bands, 0.01 * bands);
}

TEST(Qualification, HeadConservatism) {
  auto high = reference();
  for (auto& u : high.units) u.head_min_m = 431.0;
  PlantSimulator lo(reference(), parse_stack("FS"));
  PlantSimulator hi(high, parse_stack("FS"));
  EXPECT_LE(run_fcr(lo, TestMode::Turbine).report.capability_mw,
            run_fcr(hi, TestMode::Turbine).report.capability_mw + 1e-6);
}

TEST(Qualification, OversizedFfrIsRejected) {
  PlantSimulator sim(reference(), parse_stack("VS (DFIM)"));
  const auto r = run_ffr_test(sim, TestMode::Turbine, 180.0);
  EXPECT_FALSE(r.report.pass);
  EXPECT_TRUE(run_ffr_test(sim, TestMode::Turbine, 60.0).report.pass);
}

TEST(Qualification, BlackStartMonotoneAgainstLinearScan) {
  PlantSimulator sim(reference(), parse_stack("FS"));
  const auto cap = black_start_capacity(sim);
  const double res = cap.report.metrics.at("search_resolution_mw");
  double last_pass = 0.0, first_fail = -1.0;
  for (double load = 4.0; load <= 48.0; load += 4.0) {
    const bool pass = run_black_start_test(sim, load).report.pass;
    if (pass) {
      ASSERT_LT(first_fail, 0.0) << "load " << load << " passes after a failure at " << first_fail;
      last_pass = load;
    } else if (first_fail < 0.0) {
      first_fail = load;
    }
  }
  ASSERT_GT(first_fail, 0.0);
  EXPECT_GE(cap.report.capability_mw, last_pass - res);
  EXPECT_LE(cap.report.capability_mw, first_fail + res);
}
