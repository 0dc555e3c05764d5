#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hydroflex/errors.hpp"
#include "hydroflex/unit/bess.hpp"
#include "hydroflex/unit/characteristic.hpp"
#include "hydroflex/unit/converter.hpp"
#include "hydroflex/unit/unit.hpp"

using namespace hydroflex;
using namespace hydroflex::unit;

namespace {

Characteristic linear_table() {
  std::vector<double> n{0.5, 1.0}, h{0.5, 1.0}, y{0.0, 0.5, 1.0}, q, t;
  for (double ni : n) {
    for (double hj : h) {
      for (double yk : y) {
        q.push_back(yk * hj + 0.1 * ni);
        t.push_back(2.0 * yk - ni + hj);
      }
    }
  }
  return Characteristic(n, h, y, q, t);
}

UnitConfig dfim() {
  UnitConfig u;
  u.id = "m1";
  u.machine_node = "m1";
  u.technology = Technology::Dfim;
  u.rated_power_mw = 395.0;
  u.rated_apparent_power_mva = 420.0;
  u.tau_m_s = 7.9;
  u.synchronous_speed_rpm = 375.0;
  u.speed_range = {350.0, 365.5, 381.0};
  u.head_min_m = 413.64;
  u.head_max_m = 431.8;
  u.turbine_range = {186.4, 372.8};
  u.pump_range = PowerRange{300.0, 390.0};
  return u;
}

}  // namespace

TEST(Characteristic, NodeIdentity) {
  const auto c = linear_table();
  const auto p = c.evaluate(1.0, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(p.q, c.q_at(1, 0, 1));
  EXPECT_DOUBLE_EQ(p.t, c.t_at(1, 0, 1));
  EXPECT_FALSE(p.extrapolated);
}

TEST(Characteristic, LinearMidpoint) {
  const auto c = linear_table();
  const auto a = c.evaluate(0.5, 0.5, 0.0), b = c.evaluate(1.0, 1.0, 1.0), m = c.evaluate(0.75, 0.75, 0.5);
  EXPECT_NEAR(m.t, 0.5 * (a.t + b.t), 1e-12);
  EXPECT_NEAR(m.dt_dy, 2.0, 1e-12);
  EXPECT_NEAR(m.dt_dn, -1.0, 1e-12);
}

TEST(Characteristic, FlagsExtrapolation) {
  EXPECT_TRUE(linear_table().evaluate(1.2, 0.7, 0.5).extrapolated);
}

TEST(Characteristic, RejectsBadShape) {
  EXPECT_THROW(Characteristic({1.0, 0.5}, {0.5, 1.0}, {0.0, 1.0}, std::vector<double>(8), std::vector<double>(8)),
               ConfigError);
  EXPECT_THROW(Characteristic({0.5, 1.0}, {0.5, 1.0}, {0.0, 1.0}, std::vector<double>(7), std::vector<double>(8)),
               ConfigError);
}

TEST(Characteristic, CsvRoundTrip) {
  const auto c = synthetic_pump_turbine();
  std::stringstream s;
  c.write_csv(s);
  const auto d = Characteristic::read_csv(s);
  ASSERT_EQ(d.n_axis().size(), c.n_axis().size());
  ASSERT_EQ(d.h_axis().size(), c.h_axis().size());
  ASSERT_EQ(d.y_axis().size(), c.y_axis().size());
  for (std::size_t i = 0; i < c.n_axis().size(); ++i) {
    for (std::size_t j = 0; j < c.h_axis().size(); ++j) {
      for (std::size_t k = 0; k < c.y_axis().size(); ++k) {
        ASSERT_NEAR(d.q_at(i, j, k), c.q_at(i, j, k), 1e-10);
        ASSERT_NEAR(d.t_at(i, j, k), c.t_at(i, j, k), 1e-10);
      }
    }
  }
}

TEST(Characteristic, SyntheticShape) {
  const auto c = synthetic_pump_turbine();
  EXPECT_EQ(c.quadrants(), 4);
  EXPECT_TRUE(c.monotone_in_opening());
  const auto closed = c.evaluate(1.0, 1.0, 0.0);
  EXPECT_NEAR(closed.q, 0.0, 1e-9);
  EXPECT_LE(closed.t, 0.0);
  const auto rated = c.evaluate(1.0, 1.0, 1.0);
  EXPECT_GT(rated.q, 0.5);
  EXPECT_GT(rated.t, 0.5);
  const auto pump = c.evaluate(-1.0, 1.0, 1.0);
  EXPECT_LT(pump.q, 0.0);
}

TEST(Characteristic, CsvErrorsNameTheLine) {
  std::stringstream s("n_pu,h_pu,y_pu,q_pu,t_pu\n1,1,1,oops,1\n");
  try {
    Characteristic::read_csv(s, "bad.csv");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(Swing, Equilibrium) {
  EXPECT_DOUBLE_EQ(swing_step(39.27, 1e6, 1e6, 4e6, 0.01), 39.27);
}

TEST(Swing, ConstantTorqueOracle) {
  const double j = 4.0e6, dtorque = 2.5e6, dt = 0.01;
  double w = 39.0, e0 = kinetic_energy_j(j, w), work = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double w1 = swing_step(w, dtorque, 0.0, j, dt);
    work += swing_work_j(w, w1, dtorque, dt);
    w = w1;
  }
  EXPECT_NEAR(w - 39.0, dtorque * 5.0 / j, 1e-9);
  EXPECT_NEAR(kinetic_energy_j(j, w) - e0, work, 1e-6 * work);
}

TEST(Swing, InertiaInversion) {
  const double j = rotor_inertia(7.9, 395e6, 375.0);
  const double w = rpm_to_rad_s(375.0);
  EXPECT_NEAR(j * w * w / 395e6, 7.9, 1e-12);
  EXPECT_NEAR(dfim().inertia_kgm2(), j, 1e-6 * j);
}

TEST(UnitConfig, Windows) {
  auto u = dfim();
  EXPECT_TRUE(u.validate().empty());
  EXPECT_DOUBLE_EQ(u.transient_max_rpm(), 381.0 * 1.02);
  EXPECT_DOUBLE_EQ(u.transient_min_rpm(), 350.0 * 0.98);
  u.technology = Technology::Fixed;
  EXPECT_DOUBLE_EQ(u.steady_speed_window().min_rpm, 375.0);
  EXPECT_DOUBLE_EQ(u.steady_speed_window().max_rpm, 375.0);
  EXPECT_NEAR(locked_speed_rpm(u, 49.8) / 375.0 - 49.8 / 50.0, 0.0, 1e-12);
  u.technology = Technology::Fsfc;
  EXPECT_DOUBLE_EQ(u.transient_min_rpm(), 187.5);
}

TEST(UnitConfig, Diagnostics) {
  auto u = dfim();
  u.speed_range.middle_rpm = 390.0;
  ASSERT_EQ(u.validate().size(), 1u);
  EXPECT_NE(u.validate()[0].find("n_min < n_middle < n_max"), std::string::npos);
  u = dfim();
  u.pump_range = PowerRange{390.0, 300.0};
  ASSERT_EQ(u.validate().size(), 1u);
  EXPECT_NE(u.validate()[0].find("pump power range is empty"), std::string::npos);
  u = dfim();
  u.tau_m_s = 0.0;
  EXPECT_FALSE(u.validate().empty());
}

TEST(Converter, FirstOrderLag) {
  Converter c(0.1, 420.0);
  double p = 0.0;
  for (int k = 0; k < 10; ++k) p = c.step(10.0, 0.01);
  EXPECT_NEAR(p, 10.0 * (1.0 - std::exp(-1.0)), 1e-9);
  EXPECT_THROW(c.step(500.0, 0.01), SimulationError);
}

TEST(StrategySwitch, RaisesOnPredictedOverspeed) {
  StrategySwitch s(350.0, 381.0, 0.01, 20.0, 395.0, 375.0);
  EXPECT_EQ(s.update(370.0, 0.0), 0.0);
  EXPECT_FALSE(s.active());
  const double corr = s.update(380.0, 20.0);
  EXPECT_TRUE(s.active());
  EXPECT_EQ(s.direction(), 1);
  EXPECT_NEAR(corr, 20.0 * 395.0 * 9.0 / 375.0, 1e-9);
  s.update(379.0, 0.0);
  EXPECT_FALSE(s.active());
  s.update(340.0, -10.0);
  EXPECT_EQ(s.direction(), -1);
  EXPECT_EQ(s.activations(), 2);
}

TEST(StrategySwitch, IgnoresEdgeOperation) {
  StrategySwitch s(350.0, 381.0, 0.01, 20.0, 395.0, 375.0);
  EXPECT_EQ(s.update(381.02, 1.0), 0.0);
  EXPECT_FALSE(s.active());
}

TEST(Stall, FsfcOnly) {
  auto u = dfim();
  EXPECT_NO_THROW(check_stall(u, 100.0, 0.0));
  u.technology = Technology::Fsfc;
  EXPECT_NO_THROW(check_stall(u, 200.0, 0.0));
  EXPECT_THROW(check_stall(u, 180.0, 0.0), SimulationError);
}

TEST(Bess, IdleKeepsSoc) {
  Bess b{50.0, 25.0, 0.6, 0.0, 0.0};
  for (int k = 0; k < 100; ++k) bess_step(b, 0.0, 0.1);
  EXPECT_DOUBLE_EQ(b.soc, 0.6);
}

TEST(Bess, FullDischargeTime) {
  Bess b{50.0, 25.0, 1.0, 0.0, 0.0};
  const double dt = 1.0;
  int steps = 0;
  while (b.soc > 0.0 && steps < 10000) {
    bess_step(b, 50.0, dt);
    ++steps;
  }
  EXPECT_NEAR(steps, 1800, 1);
}

TEST(Bess, ClampAndConservation) {
  Bess b{50.0, 25.0, 0.5, 0.05, 0.0};
  const auto r = bess_step(b, 80.0, 0.01);
  EXPECT_TRUE(r.saturated);
  EXPECT_LE(r.power_mw, 50.0);
  Bess c{50.0, 25.0, 0.5, 0.0, 0.0};
  for (int k = 0; k < 1000; ++k) bess_step(c, k % 2 ? 30.0 : -30.0, 0.01);
  EXPECT_NEAR(c.soc, 0.5, 1e-6);
}
