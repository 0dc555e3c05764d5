#include "hydroflex/campaign/campaign.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "hydroflex/errors.hpp"

namespace hydroflex::campaign {

namespace fs = std::filesystem;
using matrix::Service;
using qualification::TestMode;
using qualification::TestRun;

namespace {

std::string normalise(std::string s) {
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out += (c == '/' || c == '_') ? '-' : c;
  }
  return out;
}

std::string cell_stem(const std::string& stack, Service s) {
  return plant::stack_slug(stack) + "__" + matrix::service_id(s);
}

TestRun voltvar_run(const plant::PlantSimulator& sim, TestMode mode) {
  const auto& u = sim.unit(0);
  TestRun r;
  r.report.service = "volt/var";
  r.report.stack = sim.stack().label;
  r.report.mode = qualification::to_string(mode);
  r.report.capability_mw = qualification::voltvar_capability(u.rated_apparent_power_mva, u.rated_power_mw);
  r.report.metrics["rated_apparent_power_mva"] = u.rated_apparent_power_mva;
  r.report.metrics["active_power_mw"] = u.rated_power_mw;
  r.report.notes.push_back("reactive power at rated active power, MVAr");
  r.report.pass = true;
  return r;
}

}  // namespace

std::vector<Service> parse_services(const std::string& list) {
  std::vector<Service> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto id = normalise(item);
    if (id.empty()) continue;
    if (id == "all") {
      out.insert(out.end(), matrix::kServices.begin(), matrix::kServices.end());
    } else if (id == "inertia") {
      out.push_back(Service::SyncInertia);
      out.push_back(Service::SynthInertia);
    } else if (id == "blackstart") {
      out.push_back(Service::BlackStart);
    } else if (id == "voltvar") {
      out.push_back(Service::VoltVar);
    } else {
      out.push_back(matrix::service_from_id(id));
    }
  }
  if (out.empty()) throw ConfigError("no services selected");
  return out;
}

std::vector<Service> evaluated_services(const std::vector<Service>& requested) {
  std::vector<Service> out;
  for (auto s : requested) {
    if (s == Service::Mfrr || s == Service::Rr) s = Service::Afrr;
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Cell run_cell(const plant::PlantSimulator& sim, Service service) {
  Cell c;
  c.stack = sim.stack().label;
  c.service = service;
  c.hsc = sim.stack().hsc;
  c.fixed_speed = !sim.stack().variable_speed();
  const bool vs = sim.stack().variable_speed();

  auto both = [&](auto&& test) {
    c.runs.push_back(test(TestMode::Turbine));
    c.runs.push_back(test(TestMode::Pump));
    c.turbine_mw = c.runs[0].report.capability_mw;
    c.pump_mw = c.runs[1].report.capability_mw;
  };
  auto combined = [&](auto&& test) {
    if (!c.hsc) {
      both(test);
      return;
    }
    c.runs.push_back(test(TestMode::Hsc));
    const auto& m = c.runs[0].report.metrics;
    c.turbine_mw = m.count("turbine_mw") ? m.at("turbine_mw") : 0.0;
    c.pump_mw = m.count("pump_mw") ? m.at("pump_mw") : 0.0;
  };

  try {
    switch (service) {
      case Service::SyncInertia:
        c.applicable = !vs;
        if (c.applicable) both([&](TestMode m) { return qualification::synchronous_inertia_test(sim, m); });
        break;
      case Service::SynthInertia:
        c.applicable = vs;
        if (c.applicable) both([&](TestMode m) { return qualification::synthetic_inertia_test(sim, m); });
        break;
      case Service::Ffr:
        c.applicable = vs;
        if (c.applicable) combined([&](TestMode m) { return qualification::run_ffr(sim, m); });
        break;
      case Service::Fcr:
        combined([&](TestMode m) { return qualification::run_fcr(sim, m); });
        break;
      case Service::Afrr:
        combined([&](TestMode m) { return qualification::run_afrr(sim, m); });
        break;
      case Service::VoltVar:
        both([&](TestMode m) { return voltvar_run(sim, m); });
        break;
      case Service::BlackStart:
        c.applicable = !c.hsc;
        if (c.applicable) {
          c.runs.push_back(qualification::black_start_capacity(sim));
          c.turbine_mw = c.runs[0].report.capability_mw;
        }
        break;
      case Service::Mfrr:
      case Service::Rr:
        throw ConfigError("mFRR and RR are derived from aFRR, not simulated");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    c.error = e.what();
    c.runs.clear();
    c.turbine_mw.reset();
    c.pump_mw.reset();
  }
  return c;
}

io::json cell_to_json(const Cell& c, const matrix::ScoringConfig& scoring) {
  io::json j = {{"stack", c.stack},
                {"service", matrix::service_id(c.service)},
                {"applicable", c.applicable},
                {"hsc", c.hsc},
                {"fixed_speed", c.fixed_speed}};
  j["status"] = c.failed() ? "failed" : (c.applicable ? "ok" : "not applicable");
  if (c.failed()) j["error"] = c.error;
  io::json cap = io::json::object();
  if (c.turbine_mw) cap["T"] = *c.turbine_mw;
  if (c.pump_mw) cap["P"] = *c.pump_mw;
  j["capability_mw"] = cap;
  auto ref = scoring.reference_mw.find(c.service);
  if (ref != scoring.reference_mw.end()) j["reference_mw"] = ref->second;
  io::json reports = io::json::array();
  for (const auto& r : c.runs) reports.push_back(io::to_json(r.report));
  j["reports"] = reports;
  return j;
}

Cell cell_from_json(const io::json& j) {
  try {
    Cell c;
    c.stack = j.at("stack").get<std::string>();
    c.service = matrix::service_from_id(j.at("service").get<std::string>());
    c.applicable = j.at("applicable").get<bool>();
    c.hsc = j.at("hsc").get<bool>();
    c.fixed_speed = j.at("fixed_speed").get<bool>();
    if (j.contains("error")) c.error = j["error"].get<std::string>();
    const auto& cap = j.at("capability_mw");
    if (cap.contains("T")) c.turbine_mw = cap["T"].get<double>();
    if (cap.contains("P")) c.pump_mw = cap["P"].get<double>();
    for (const auto& r : j.at("reports")) c.runs.push_back({io::report_from_json(r), {}});
    return c;
  } catch (const io::json::exception& e) {
    throw ConfigError(std::string("cell JSON: ") + e.what());
  }
}

matrix::MatrixRow build_row(const std::string& demonstrator, const std::string& stack, const std::vector<Cell>& cells,
                            const matrix::ScoringConfig& scoring) {
  matrix::MatrixRow row;
  row.demonstrator = demonstrator;
  row.stack = stack;
  for (const auto& c : cells) {
    if (c.stack != stack || !c.applicable || c.failed() || !c.turbine_mw) continue;
    const auto i = static_cast<std::size_t>(c.service);
    const auto t = matrix::score_service(c.service, *c.turbine_mw, scoring, matrix::ScoreMode::Turbine);
    if (!matrix::has_pump_column(c.service)) {
      row.turbine[i] = t;
      continue;
    }
    const auto p = matrix::score_service(c.service, c.pump_mw.value_or(0.0), scoring, matrix::ScoreMode::Pump);
    if (c.hsc) {
      row.turbine[i] = matrix::aggregate_hsc(t, p);
    } else {
      row.turbine[i] = t;
      row.pump[i] = p;
    }
    if (c.service != Service::Afrr) continue;
    const auto mi = static_cast<std::size_t>(Service::Mfrr);
    const auto ri = static_cast<std::size_t>(Service::Rr);
    std::tie(row.turbine[mi], row.turbine[ri]) = matrix::derive_mfrr_rr(*row.turbine[i], c.hsc && c.fixed_speed);
    if (row.pump[i]) std::tie(row.pump[mi], row.pump[ri]) = matrix::derive_mfrr_rr(*row.pump[i], c.fixed_speed);
  }
  return row;
}

std::vector<Residual> calibration_residuals(const matrix::AncillaryServicesMatrix& simulated,
                                            const matrix::AncillaryServicesMatrix& published) {
  std::vector<Residual> out;
  for (const auto& srow : simulated.rows) {
    auto prow = std::find_if(published.rows.begin(), published.rows.end(), [&](const matrix::MatrixRow& r) {
      return r.demonstrator == srow.demonstrator && r.stack == srow.stack;
    });
    if (prow == published.rows.end()) continue;
    for (std::size_t i = 0; i < matrix::kServices.size(); ++i) {
      const auto s = matrix::kServices[i];
      auto base = [&](const char* col) {
        Residual r;
        r.demonstrator = srow.demonstrator;
        r.stack = srow.stack;
        r.service = s;
        r.column = col;
        return r;
      };
      const auto& st = srow.turbine[i];
      const auto& pt = prow->turbine[i];
      if ((st && st->hsc_pair) || (pt && pt->hsc_pair)) {
        auto a = base("T (HSC)"), b = base("P (HSC)");
        if (st && st->hsc_pair) std::tie(a.simulated, b.simulated) = *st->hsc_pair;
        if (pt && pt->hsc_pair) std::tie(a.published, b.published) = *pt->hsc_pair;
        out.push_back(a);
        out.push_back(b);
        continue;
      }
      auto t = base("T");
      if (st) t.simulated = st->tenths;
      if (pt) t.published = pt->tenths;
      out.push_back(t);
      if (!matrix::has_pump_column(s)) continue;
      auto p = base("P");
      if (srow.pump[i]) p.simulated = srow.pump[i]->tenths;
      if (prow->pump[i]) p.published = prow->pump[i]->tenths;
      out.push_back(p);
    }
  }
  return out;
}

std::string render_residuals(const std::vector<Residual>& rs) {
  std::ostringstream out;
  out << "| Demonstrator | Technology | Service | Column | Simulated | Published | Residual |\n";
  out << "|---|---|---|---|---|---|---|\n";
  int worst = 0;
  std::size_t compared = 0, mismatched = 0;
  for (const auto& r : rs) {
    auto txt = [](const std::optional<int>& v) { return v ? matrix::format_tenths(*v) : std::string("NA"); };
    std::string res = "";
    if (r.simulated && r.published) {
      const int d = *r.simulated - *r.published;
      res = (d > 0 ? "+" : "") + matrix::format_tenths(d);
      worst = std::max(worst, std::abs(d));
      ++compared;
    } else if (r.simulated.has_value() != r.published.has_value()) {
      res = "applicability differs";
      ++mismatched;
    }
    out << "| " << r.demonstrator << " | " << r.stack << " | " << matrix::service_id(r.service) << " | " << r.column
        << " | " << txt(r.simulated) << " | " << txt(r.published) << " | " << res << " |\n";
  }
  out << "\nCompared cells: " << compared << ". Largest absolute residual: " << matrix::format_tenths(worst)
      << ". Applicability mismatches: " << mismatched << ".\n";
  return out.str();
}

Options load_manifest(const fs::path& path) {
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open manifest '" + path.string() + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!doc.IsMap()) throw ConfigError("manifest must be a mapping");
  const fs::path dir = path.parent_path();
  auto rel = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : dir / p; };
  Options o;
  try {
    for (const auto& kv : doc) {
      const auto key = kv.first.as<std::string>();
      const auto& v = kv.second;
      const int line = v.Mark().line + 1;
      if (key == "plant_config") {
        o.config = rel(v.as<std::string>());
      } else if (key == "stacks") {
        o.stacks = v.as<std::vector<std::string>>();
      } else if (key == "services") {
        std::string list;
        if (v.IsSequence()) {
          for (const auto& s : v) list += s.as<std::string>() + ",";
        } else {
          list = v.as<std::string>();
        }
        o.services = parse_services(list);
      } else if (key == "out") {
        o.out = rel(v.as<std::string>());
      } else if (key == "dt_s") {
        o.dt_s = v.as<double>();
      } else if (key == "jobs") {
        o.jobs = v.as<unsigned>();
      } else if (key == "trace_every") {
        o.trace_every = v.as<std::size_t>();
      } else if (key == "formats") {
        o.formats.clear();
        for (const auto& f : v) o.formats.push_back(matrix::format_from_string(f.as<std::string>()));
      } else if (key == "published_scores") {
        o.published = rel(v.as<std::string>());
      } else {
        throw ConfigError("unknown manifest key '" + key + "'", line);
      }
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (o.config.empty()) throw ConfigError("manifest needs plant_config");
  return o;
}

fs::path default_output_dir() {
  const char* env = std::getenv("HYDROFLEX_OUT");
  return env && *env ? fs::path(env) : fs::path("hydroflex-out");
}

void write_matrix(const matrix::AncillaryServicesMatrix& m, const fs::path& out_dir,
                  const std::vector<matrix::Format>& formats) {
  for (auto f : formats) {
    io::write_text(out_dir / (std::string("matrix.") + matrix::format_extension(f)), matrix::render(m, f));
  }
}

Summary run_campaign(const Options& o, std::ostream& log) {
  auto cfg = plant::load_plant_config(o.config.string());
  if (o.dt_s) {
    if (!(*o.dt_s > 0.0)) throw ConfigError("dt must be positive");
    cfg.solver.dt_s = *o.dt_s;
  }
  const auto diags = plant::validate_plant_config(cfg);
  if (!diags.empty()) {
    std::string msg = "invalid plant configuration:";
    for (const auto& d : diags) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  const auto stacks = o.stacks.empty() ? cfg.stacks : o.stacks;
  if (stacks.empty()) throw ConfigError("no technology stacks selected");
  const auto services =
      evaluated_services(o.services.empty() ? std::vector<Service>(matrix::kServices.begin(), matrix::kServices.end())
                                            : o.services);
  const auto table = plant::load_characteristic(cfg);
  std::vector<std::unique_ptr<plant::PlantSimulator>> sims;
  for (const auto& label : stacks) {
    sims.push_back(std::make_unique<plant::PlantSimulator>(cfg, plant::parse_stack(label), table));
  }

  struct Job {
    std::size_t stack;
    Service service;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    for (auto s : services) jobs.push_back({i, s});
  }
  std::vector<Cell> cells(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex write_mu;
  std::size_t done = 0;
  std::exception_ptr config_error;

  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      Cell c;
      try {
        c = run_cell(*sims[jobs[k].stack], jobs[k].service);
      } catch (...) {
        std::lock_guard lock(write_mu);
        if (!config_error) config_error = std::current_exception();
        continue;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(write_mu);
      const auto stem = cell_stem(c.stack, c.service);
      for (auto& r : c.runs) {
        if (r.trace.size() == 0) continue;
        const auto name = "traces/" + stem + "__" + r.report.mode + ".csv";
        io::write_trace_csv(o.out / name, r.trace, o.trace_every);
        r.report.trace_file = name;
        r.trace = {};
      }
      io::write_text(o.out / ("cells/" + stem + ".json"), cell_to_json(c, cfg.scoring).dump(2) + "\n");
      ++done;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.1f s", secs);
      log << "[" << done << "/" << jobs.size() << "] " << c.stack << " " << matrix::service_id(c.service) << ": "
          << (c.failed() ? "FAILED (" + c.error + ")" : (c.applicable ? "ok" : "not applicable")) << ", " << buf
          << "\n";
      cells[k] = std::move(c);
    }
  };
  unsigned n = o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (config_error) std::rethrow_exception(config_error);

  Summary sum;
  sum.cells = cells.size();
  for (const auto& c : cells) sum.failed += c.failed() ? 1 : 0;
  const std::string demo = cfg.demonstrator.empty() ? cfg.name : cfg.demonstrator;
  for (const auto& label : stacks) sum.matrix.rows.push_back(build_row(demo, label, cells, cfg.scoring));

  io::json manifest = {{"plant_config", fs::absolute(o.config).lexically_normal().filename().string()},
                       {"demonstrator", demo},
                       {"stacks", stacks},
                       {"dt_s", cfg.solver.dt_s}};
  io::json svc = io::json::array();
  for (auto s : services) svc.push_back(matrix::service_id(s));
  manifest["services"] = svc;
  io::json refs = io::json::object();
  for (const auto& [s, v] : cfg.scoring.reference_mw) refs[matrix::service_id(s)] = v;
  manifest["scoring_reference_mw"] = refs;
  io::write_text(o.out / "campaign.json", manifest.dump(2) + "\n");
  write_matrix(sum.matrix, o.out, o.formats);

  auto published = o.published;
  if (!published) {
    const auto guess = o.config.parent_path() / "published_scores.json";
    if (fs::exists(guess)) published = guess;
  }
  if (published) {
    const auto pub = matrix::load_json(published->string());
    for (const auto& r : calibration_residuals(sum.matrix, pub)) {
      auto svc_eval = r.service == Service::Mfrr || r.service == Service::Rr ? Service::Afrr : r.service;
      if (std::find(services.begin(), services.end(), svc_eval) != services.end()) sum.residuals.push_back(r);
    }
    io::write_text(o.out / "calibration.md", "# Calibration residuals\n\nSimulated scores against the published "
                                             "matrix, in score units.\n\n" +
                                                 render_residuals(sum.residuals));
  }
  return sum;
}

matrix::AncillaryServicesMatrix matrix_from_reports(const fs::path& out_dir) {
  const auto manifest = io::json::parse(io::read_text(out_dir / "campaign.json"), nullptr, false);
  if (manifest.is_discarded()) throw ConfigError("campaign.json is not valid JSON");
  try {
    matrix::ScoringConfig scoring;
    for (const auto& [k, v] : manifest.at("scoring_reference_mw").items()) {
      scoring.reference_mw[matrix::service_from_id(k)] = v.get<double>();
    }
    std::vector<Cell> cells;
    const auto stacks = manifest.at("stacks").get<std::vector<std::string>>();
    for (const auto& stack : stacks) {
      for (const auto& s : manifest.at("services")) {
        const auto path = out_dir / ("cells/" + cell_stem(stack, matrix::service_from_id(s.get<std::string>())) +
                                     ".json");
        const auto j = io::json::parse(io::read_text(path), nullptr, false);
        if (j.is_discarded()) throw ConfigError("'" + path.string() + "' is not valid JSON");
        cells.push_back(cell_from_json(j));
      }
    }
    matrix::AncillaryServicesMatrix m;
    const auto demo = manifest.at("demonstrator").get<std::string>();
    for (const auto& stack : stacks) m.rows.push_back(build_row(demo, stack, cells, scoring));
    return m;
  } catch (const io::json::exception& e) {
    throw ConfigError(std::string("campaign.json: ") + e.what());
  }
}

}  // namespace hydroflex::campaign
