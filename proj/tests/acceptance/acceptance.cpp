#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hydroflex/campaign/campaign.hpp"
#include "hydroflex/control/hsc.hpp"
#include "hydroflex/control/reserves.hpp"
#include "hydroflex/hydraulic/network.hpp"
#include "hydroflex/io/report_io.hpp"
#include "hydroflex/matrix/matrix.hpp"
#include "hydroflex/qualification/tests.hpp"

using namespace hydroflex;
namespace fs = std::filesystem;

namespace {

const fs::path kData = HYDROFLEX_DATA_DIR;
const fs::path kConfig = kData / "reference" / "frades_like.yaml";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

bool within(double x, double ref, double rel) { return std::abs(x - ref) <= rel * std::abs(ref); }

// -- 1 ----------------------------------------------------------------------

Outcome hydraulic_oracles() {
  using namespace hydraulic;
  const double area = std::numbers::pi / 4.0;
  NetworkSpec chain;
  chain.elements.push_back(Reservoir{"res", 100.0});
  chain.elements.push_back(Pipe{"pipe", 1000.0, 1.0, 1000.0, 0.0, 20});
  chain.elements.push_back(Valve{"valve", area * std::sqrt(100.0 + 1e-4) / 100.0, 1.0, 0.0});
  chain.junctions.push_back({"in", {{"res", Port::Single}, {"pipe", Port::Upstream}}});
  chain.junctions.push_back({"out", {{"pipe", Port::Downstream}, {"valve", Port::Upstream}}});
  auto net = build_network(chain, {.dt_s = 0.01});
  net.steady_state({});
  const double v0 = net.state().pipes[0].discharge_m3s.back() / area;
  net.set_valve_opening(net.valve_index("valve"), 0.0);
  double peak = 0.0, imbalance = 0.0;
  for (int k = 0; k < 300; ++k) {
    net.step({});
    peak = std::max(peak, net.state().junction_head_m[1] - 100.0);
    imbalance = std::max(imbalance, net.max_junction_imbalance());
  }
  const double jouk = 1000.0 * v0 / kGravity;

  const double tunnel_area = std::numbers::pi * 9.0 / 4.0;
  NetworkSpec tank;
  tank.elements.push_back(Reservoir{"res", 100.0});
  tank.elements.push_back(Pipe{"tunnel", 1000.0, 3.0, 1000.0, 0.0, 10});
  tank.elements.push_back(SurgeTank{"tank", 50.0, 0.0, 0.0, 200.0, 0.0});
  tank.elements.push_back(Valve{"valve", 5.0, 1.0, 0.0});
  tank.junctions.push_back({"in", {{"res", Port::Single}, {"tunnel", Port::Upstream}}});
  tank.junctions.push_back({"node", {{"tunnel", Port::Downstream}, {"tank", Port::Single}, {"valve", Port::Upstream}}});
  auto tn = build_network(tank, {.dt_s = 0.01});
  tn.steady_state({});
  tn.set_valve_opening(tn.valve_index("valve"), 0.0);
  std::vector<double> crossings;
  double prev = tn.state().tank_level_m[0];
  for (int k = 1; k <= 70000; ++k) {
    const double level = tn.step({}).tank_level_m[0];
    imbalance = std::max(imbalance, tn.max_junction_imbalance());
    if (prev < 100.0 && level >= 100.0) crossings.push_back((k - 1 + (100.0 - prev) / (level - prev)) * 0.01);
    prev = level;
  }
  const double period = crossings.size() > 1 ? (crossings.back() - crossings.front()) / (crossings.size() - 1) : 0.0;
  const double analytic = 2.0 * std::numbers::pi * std::sqrt(1000.0 * 50.0 / (kGravity * tunnel_area));

  Outcome o;
  o.pass = within(peak, jouk, 0.02) && within(period, analytic, 0.03) && imbalance < 1e-6;
  o.detail = fmt("surge %.2f m vs a*dV/g %.2f m; tank period %.2f s vs %.2f s", peak, jouk, period, analytic) +
             fmt("; max junction imbalance %.1e m3/s", imbalance);
  return o;
}

// -- 2 ----------------------------------------------------------------------

Outcome inertia() {
  const double tau = 7.9, s = 395e6, rocof = -1.0, fn = 50.0;
  const double w = 2.0 * std::numbers::pi * 375.0 / 60.0;
  const double j = tau * s / (w * w);
  const double swing = -j * w * (w * rocof / fn) / 1e6;
  const double p = qualification::inertial_power(tau, s / 1e6, rocof, fn);

  const auto cfg = plant::load_plant_config(kConfig.string());
  plant::PlantSimulator vs(cfg, plant::parse_stack("VS (DFIM)"));
  const auto sim = qualification::synthetic_inertia_test(vs, qualification::TestMode::Turbine);
  const double peak = sim.report.metrics.at("peak_mw");

  Outcome o;
  o.pass = within(p, 62.4, 0.001) && within(p, swing, 0.001) && within(peak, p, 0.10);
  o.detail = fmt("inertial_power %.3f MW, swing oracle %.3f MW; simulated synthetic peak %.2f MW", p, swing, peak);
  return o;
}

// -- 3 ----------------------------------------------------------------------

Outcome droop() {
  const control::FcrController c{0.0085, 0.0, 1e9, 50.0, 395.0};
  const double rp = control::fcr_command(c, 49.8);
  control::HscUnit pump{unit::Technology::Dfim, unit::Mode::Pump, -390.0, -300.0, -345.0};
  control::HscUnit turbine{unit::Technology::Dfim, unit::Mode::Turbine, 0.0, 372.8, 186.4};
  const double pump_band = control::hsc_unit_band(pump);
  const double sum = control::hsc_plant_band({turbine, pump});
  Outcome o;
  o.pass = within(rp, 186.4, 0.01) && pump_band == 45.0 && std::abs(sum - 231.4) < 1e-9;
  o.detail = fmt("droop reserve %.2f MW; pump band +-%.1f MW; HSC sum %.1f MW", rp, pump_band, sum);
  return o;
}

// -- 4 ----------------------------------------------------------------------

Outcome reference_plant() {
  using namespace qualification;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = plant::load_plant_config(kConfig.string());
  plant::PlantSimulator vs(cfg, plant::parse_stack("VS (DFIM)"));
  plant::PlantSimulator vs_spss(cfg, plant::parse_stack("VS (DFIM) & SPSS"));
  plant::PlantSimulator fs_(cfg, plant::parse_stack("FS"));
  const auto fcr = run_fcr(vs_spss, TestMode::Turbine);
  const auto ffr_mid = run_ffr(vs, TestMode::Turbine);
  const auto ffr_max = run_ffr(vs, TestMode::Turbine, cfg.units[0].speed_range.max_rpm);
  const auto bs_vs = black_start_capacity(vs);
  const auto bs_fs = black_start_capacity(fs_);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double bs_mid = bs_vs.report.metrics.at("capacity_at_365.5_rpm");
  const double bs_max = bs_vs.report.metrics.at("capacity_at_381.0_rpm");
  const double ratio = bs_fs.report.capability_mw > 0.0 ? bs_mid / bs_fs.report.capability_mw : 1e9;
  Outcome o;
  o.pass = fcr.report.pass && within(fcr.report.capability_mw, 186.4, 0.05) &&
           within(ffr_mid.report.capability_mw, 80.0, 0.10) && within(ffr_max.report.capability_mw, 110.0, 0.10) &&
           within(bs_mid, 113.0, 0.10) && within(bs_max, 124.0, 0.10) && ratio >= 2.0 && secs < 300.0;
  o.detail = fmt("FCR %.2f MW; FFR %.2f / %.2f MW", fcr.report.capability_mw, ffr_mid.report.capability_mw,
                 ffr_max.report.capability_mw) +
             fmt("; black start %.2f / %.2f MW, VS/FS %.2f", bs_mid, bs_max, ratio) + fmt("; %.1f s", secs);
  return o;
}

// -- 5 ----------------------------------------------------------------------

std::vector<double> grid(double end, double dt) {
  std::vector<double> t;
  for (int k = 0; k * dt <= end + 1e-9; ++k) t.push_back(k * dt);
  return t;
}

Outcome envelopes() {
  using namespace qualification;
  const auto t = grid(160.0, 0.1);
  auto step = [&](double at, double level) {
    std::vector<double> dp;
    for (double x : t) dp.push_back(x >= at - 1e-9 ? level : 0.0);
    return dp;
  };
  auto ffr = [&](double peak, double t_full) {
    std::vector<double> dp;
    for (double x : t) dp.push_back(x <= t_full ? peak * x / t_full : (x <= 40.0 ? peak : 0.0));
    return dp;
  };
  const std::vector<std::size_t> counts{
      check_fcr_envelope(t, step(2.5, 100.0), 100.0, {}).violations.size(),
      check_fcr_envelope(t, step(1.0, 95.0), 100.0, {}).violations.size(),
      check_ffr_envelope(t, ffr(80.0, 1.5), 80.0, {}).violations.size(),
      check_ffr_envelope(t, ffr(100.0, 1.0), 80.0, {}).violations.size()};
  bool exact = true;
  for (auto n : counts) exact = exact && n == 1;

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int broken = 0, failing = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double rp = 50.0 + 150.0 * u(rng);
    const double delay = 3.0 * u(rng), tau = 1.0 + 12.0 * u(rng), gain = 0.9 + 0.15 * u(rng);
    std::vector<double> fcr;
    for (double x : t) fcr.push_back(x < delay ? 0.0 : rp * gain * (1.0 - std::exp(-(x - delay) / tau)));
    FcrLimits base;
    base.e_v = 0.02 + 0.08 * u(rng);
    FcrLimits tight = base;
    tight.e_v *= u(rng);
    tight.t_i_max_s *= u(rng);
    if (!check_fcr_envelope(t, fcr, rp, base).pass) {
      ++failing;
      broken += check_fcr_envelope(t, fcr, rp, tight).pass;
    }
    const double over = 0.35 * u(rng), t_full = 0.6 + 1.2 * u(rng);
    std::vector<double> dp;
    for (double x : t) {
      double p = x <= t_full ? rp * x / t_full : (x <= 40.0 ? rp : 0.0);
      if (x > t_full && x < t_full + 2.0) p *= 1.0 + over;
      dp.push_back(p);
    }
    FfrLimits fb;
    fb.over_delivery_max = 0.1 + 0.3 * u(rng);
    FfrLimits ft = fb;
    ft.over_delivery_max *= u(rng);
    ft.full_activation_max_s *= 0.5 + 0.5 * u(rng);
    if (!check_ffr_envelope(t, dp, rp, fb).pass) {
      ++failing;
      broken += check_ffr_envelope(t, dp, rp, ft).pass;
    }
  }
  Outcome o;
  o.pass = exact && broken == 0;
  o.detail = fmt("violations per fail case %.0f/%.0f/%.0f/%.0f", counts[0], counts[1], counts[2], counts[3]) +
             fmt("; %.0f failing randomized traces, %.0f rescued by tightening", failing, broken);
  return o;
}

// -- 6 ----------------------------------------------------------------------

Outcome afrr() {
  const auto cfg = plant::load_plant_config(kConfig.string());
  plant::PlantSimulator vs(cfg, plant::parse_stack("VS (DFIM)"));
  const auto r = qualification::run_afrr(vs, qualification::TestMode::Turbine);
  const double up = r.report.metrics.at("loading.max_deviation_pu_of_pr");
  const double down = r.report.metrics.at("unloading.max_deviation_pu_of_pr");
  Outcome o;
  o.pass = r.report.pass && up <= 0.05 && down <= 0.05;
  o.detail = fmt("PR %.1f MW; worst deviation %.2f%% (loading) / %.2f%% (unloading) of PR, band 5%%",
                 r.report.capability_mw, 100.0 * up, 100.0 * down);
  return o;
}

// -- 7 ----------------------------------------------------------------------

Outcome golden_matrix() {
  const auto m = matrix::load_json((kData / "reference" / "published_scores.json").string());
  const auto csv = matrix::render_csv(m);
  const auto golden = io::read_text(fs::path(HYDROFLEX_TEST_DATA_DIR) / "published_golden.csv");
  const auto json = matrix::render_json(m);
  const auto back = matrix::parse_json(json);
  Outcome o;
  o.pass = csv == golden && back == m && matrix::render_json(back) == json;
  o.detail = std::string("golden CSV ") + (csv == golden ? "identical" : "differs") + ", JSON round trip " +
             (back == m ? "exact" : "lossy") + fmt(", %.0f rows", static_cast<double>(m.rows.size()));
  return o;
}

// -- 8 ----------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), root).string(), io::read_text(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism() {
  const auto base = fs::temp_directory_path() / "hydroflex_acceptance";
  fs::remove_all(base);
  std::ostringstream log;
  std::vector<std::vector<std::pair<std::string, std::string>>> runs;
  std::size_t cells = 0;
  for (int i = 0; i < 2; ++i) {
    campaign::Options o;
    o.config = kConfig;
    o.out = base / ("run" + std::to_string(i));
    o.jobs = i == 0 ? 1 : 4;
    cells = campaign::run_campaign(o, log).cells;
    runs.push_back(snapshot(o.out));
  }
  fs::remove_all(base);
  Outcome o;
  o.pass = !runs[0].empty() && runs[0] == runs[1];
  o.detail = fmt("%.0f cells, %.0f artifacts per run, ", static_cast<double>(cells),
                 static_cast<double>(runs[0].size())) +
             (o.pass ? "byte-identical across reruns" : "artifacts differ");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"hydraulic oracles", hydraulic_oracles}, {"inertia arithmetic", inertia},
      {"FCR droop arithmetic", droop},          {"reference plant reproduction", reference_plant},
      {"envelope checkers", envelopes},         {"aFRR tracking", afrr},
      {"matrix golden file", golden_matrix},    {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
