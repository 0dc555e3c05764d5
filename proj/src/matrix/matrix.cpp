#include "hydroflex/matrix/matrix.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hydroflex/errors.hpp"

namespace hydroflex::matrix {

using nlohmann::json;

const char* service_id(Service s) {
  switch (s) {
    case Service::SyncInertia: return "sync-inertia";
    case Service::SynthInertia: return "synth-inertia";
    case Service::Ffr: return "ffr";
    case Service::Fcr: return "fcr";
    case Service::Afrr: return "afrr";
    case Service::Mfrr: return "mfrr";
    case Service::Rr: return "rr";
    case Service::VoltVar: return "volt-var";
    case Service::BlackStart: return "black-start";
  }
  return "?";
}

const char* service_title(Service s) {
  switch (s) {
    case Service::SyncInertia: return "SYNCHRONOUS INERTIA";
    case Service::SynthInertia: return "SYNTHETIC INERTIA";
    case Service::Ffr: return "FAST FREQUENCY RESPONSE (FFR)";
    case Service::Fcr: return "FREQUENCY CONTAINMENT RESERVE (FCR)";
    case Service::Afrr: return "AUTOMATIC FREQUENCY RESTORATION RESERVE (aFRR)";
    case Service::Mfrr: return "MANUAL FREQUENCY RESTORATION RESERVE (mFRR)";
    case Service::Rr: return "REPLACEMENT RESERVE (RR)";
    case Service::VoltVar: return "VOLTAGE/VAR CONTROL";
    case Service::BlackStart: return "BLACK START";
  }
  return "?";
}

const char* service_timescale(Service s) {
  switch (s) {
    case Service::SyncInertia: return "0 s";
    case Service::SynthInertia: return "< 500 ms";
    case Service::Ffr: return "0.5-2 s";
    case Service::Fcr: return "< 30 s";
    case Service::Afrr: return "30 s - 5 min";
    case Service::Mfrr: return "< 15 min";
    case Service::Rr: return "> 15 min";
    case Service::VoltVar: return "< 1 s";
    case Service::BlackStart: return "N/A";
  }
  return "?";
}

Service service_from_id(const std::string& id) {
  for (auto s : kServices) {
    if (id == service_id(s)) return s;
  }
  throw ConfigError("unknown service '" + id + "'");
}

ScoringConfig default_scoring() {
  ScoringConfig c;
  c.reference_mw = {{Service::SyncInertia, 62.4}, {Service::SynthInertia, 62.4}, {Service::Ffr, 114.3},
                    {Service::Fcr, 186.4},        {Service::Afrr, 186.4},        {Service::Mfrr, 186.4},
                    {Service::Rr, 186.4},         {Service::VoltVar, 237.8},     {Service::BlackStart, 171.2}};
  return c;
}

ServiceScore score_service(Service s, double capability, const ScoringConfig& cfg, ScoreMode mode) {
  auto it = cfg.reference_mw.find(s);
  if (it == cfg.reference_mw.end()) throw ConfigError(std::string("no scoring reference for ") + service_id(s));
  if (!(it->second > 0.0)) throw ConfigError(std::string("scoring reference must be positive for ") + service_id(s));
  if (!(capability >= 0.0)) throw ConfigError("capability must be non-negative");
  ServiceScore sc;
  sc.service = s;
  sc.mode = mode;
  sc.tenths = static_cast<int>(std::lround(50.0 * std::min(1.0, capability / it->second)));
  return sc;
}

std::pair<ServiceScore, ServiceScore> derive_mfrr_rr(const ServiceScore& afrr, bool fixed_speed_pump) {
  ServiceScore m = afrr, r = afrr;
  m.service = Service::Mfrr;
  r.service = Service::Rr;
  if (fixed_speed_pump) {
    m.tenths = r.tenths = 0;
    if (m.hsc_pair) m.hsc_pair->second = 0;
    if (r.hsc_pair) r.hsc_pair->second = 0;
  }
  return {m, r};
}

ServiceScore aggregate_hsc(const ServiceScore& turbine, const ServiceScore& pump) {
  ServiceScore c;
  c.service = turbine.service;
  c.mode = ScoreMode::Combined;
  c.tenths = std::min(50, turbine.tenths + pump.tenths);
  c.hsc_pair = std::make_pair(turbine.tenths, pump.tenths);
  return c;
}

std::string format_tenths(int tenths) {
  const char* sign = tenths < 0 ? "-" : "";
  const int a = std::abs(tenths);
  return sign + std::to_string(a / 10) + "." + std::to_string(a % 10);
}

std::string hsc_cell_text(const ServiceScore& c) {
  if (!c.hsc_pair) return format_tenths(c.tenths);
  return format_tenths(c.hsc_pair->first) + " + " + format_tenths(c.hsc_pair->second);
}

void validate(const AncillaryServicesMatrix& m) {
  auto in_range = [](int t) { return t >= 0 && t <= 50; };
  for (const auto& row : m.rows) {
    for (std::size_t i = 0; i < kServices.size(); ++i) {
      const auto& t = row.turbine[i];
      const auto& p = row.pump[i];
      if (t) {
        if (!in_range(t->tenths)) throw ConfigError("score outside [0, 5] in row '" + row.stack + "'");
        if (t->hsc_pair && (!in_range(t->hsc_pair->first) || !in_range(t->hsc_pair->second))) {
          throw ConfigError("HSC score outside [0, 5] in row '" + row.stack + "'");
        }
        if (t->hsc_pair && p) throw ConfigError("HSC cell spans the pump column in row '" + row.stack + "'");
      }
      if (p) {
        if (!has_pump_column(kServices[i])) throw ConfigError("black start has no pump column");
        if (!in_range(p->tenths)) throw ConfigError("score outside [0, 5] in row '" + row.stack + "'");
        if (p->hsc_pair) throw ConfigError("HSC pair in a pump slot in row '" + row.stack + "'");
      }
    }
  }
}

Format format_from_string(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  if (s == "md" || s == "markdown") return Format::Markdown;
  throw ConfigError("unknown matrix format '" + s + "' (csv, json, md)");
}

const char* format_extension(Format f) {
  switch (f) {
    case Format::Csv: return "csv";
    case Format::Json: return "json";
    case Format::Markdown: return "md";
  }
  return "txt";
}

std::string render(const AncillaryServicesMatrix& m, Format f) {
  switch (f) {
    case Format::Csv: return render_csv(m);
    case Format::Json: return render_json(m);
    case Format::Markdown: return render_markdown(m);
  }
  throw ConfigError("unknown matrix format");
}

namespace {

// Column texts for one row, two per service except black start.
std::vector<std::string> cell_texts(const MatrixRow& row) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kServices.size(); ++i) {
    const auto& t = row.turbine[i];
    const bool pair = t && t->hsc_pair;
    out.push_back(t ? (pair ? hsc_cell_text(*t) : format_tenths(t->tenths)) : kNotApplicable);
    if (has_pump_column(kServices[i])) {
      const auto& p = row.pump[i];
      out.push_back(pair ? "" : (p ? format_tenths(p->tenths) : kNotApplicable));
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::string> column_headers() {
  std::vector<std::string> h;
  for (auto s : kServices) {
    h.push_back(std::string(service_title(s)) + " T");
    if (has_pump_column(s)) h.push_back(std::string(service_title(s)) + " P");
  }
  return h;
}

std::vector<std::string> timescales() {
  std::vector<std::string> h;
  for (auto s : kServices) {
    h.push_back(service_timescale(s));
    if (has_pump_column(s)) h.push_back(service_timescale(s));
  }
  return h;
}

}  // namespace

std::string render_csv(const AncillaryServicesMatrix& m) {
  validate(m);
  std::ostringstream out;
  auto line = [&](const std::string& a, const std::string& b, const std::vector<std::string>& rest) {
    out << csv_field(a) << ',' << csv_field(b);
    for (const auto& r : rest) out << ',' << csv_field(r);
    out << '\n';
  };
  line("Demonstrator", "Technology", column_headers());
  line("Timescale", "", timescales());
  for (const auto& row : m.rows) line(row.demonstrator, row.stack, cell_texts(row));
  return out.str();
}

std::string render_markdown(const AncillaryServicesMatrix& m) {
  validate(m);
  std::ostringstream out;
  auto line = [&](const std::string& a, const std::string& b, const std::vector<std::string>& rest) {
    out << "| " << a << " | " << b;
    for (const auto& r : rest) out << " | " << r;
    out << " |\n";
  };
  line("Demonstrator", "Technology", column_headers());
  out << "|---|---";
  for (std::size_t i = 0; i < column_headers().size(); ++i) out << "|---";
  out << "|\n";
  line("Timescale", "", timescales());
  std::string last;
  for (const auto& row : m.rows) {
    line(row.demonstrator == last ? "" : row.demonstrator, row.stack, cell_texts(row));
    last = row.demonstrator;
  }
  out << "\nNA: not applicable. \"a + b\": hydraulic short circuit, turbine score + pump score.\n";
  return out.str();
}

std::string render_json(const AncillaryServicesMatrix& m) {
  validate(m);
  json rows = json::array();
  for (const auto& row : m.rows) {
    json cells = json::object();
    for (std::size_t i = 0; i < kServices.size(); ++i) {
      const auto& t = row.turbine[i];
      const auto& p = row.pump[i];
      if (!t && !p) continue;
      json c = json::object();
      if (t && t->hsc_pair) {
        c["HSC"] = json::array({t->hsc_pair->first / 10.0, t->hsc_pair->second / 10.0});
      } else {
        if (t) c["T"] = t->tenths / 10.0;
        if (p) c["P"] = p->tenths / 10.0;
      }
      cells[service_id(kServices[i])] = c;
    }
    rows.push_back({{"demonstrator", row.demonstrator}, {"stack", row.stack}, {"cells", cells}});
  }
  json doc = {{"rows", rows}};
  return doc.dump(2) + "\n";
}

namespace {

int tenths_of(const json& v) {
  if (!v.is_number()) throw ConfigError("score must be a number");
  const double x = v.get<double>() * 10.0;
  const long t = std::lround(x);
  if (std::abs(x - t) > 1e-6) throw ConfigError("score " + v.dump() + " is not a multiple of 0.1");
  return static_cast<int>(t);
}

}  // namespace

AncillaryServicesMatrix parse_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("matrix JSON: ") + e.what());
  }
  AncillaryServicesMatrix m;
  if (!doc.contains("rows") || !doc["rows"].is_array()) throw ConfigError("matrix JSON: missing rows array");
  for (const auto& r : doc["rows"]) {
    MatrixRow row;
    row.demonstrator = r.at("demonstrator").get<std::string>();
    row.stack = r.at("stack").get<std::string>();
    if (r.contains("cells")) {
      for (const auto& [key, c] : r["cells"].items()) {
        const Service s = service_from_id(key);
        const auto i = static_cast<std::size_t>(s);
        if (c.contains("HSC")) {
          const auto& pr = c["HSC"];
          if (!pr.is_array() || pr.size() != 2) throw ConfigError("matrix JSON: HSC cell needs two scores");
          ServiceScore a{s, ScoreMode::Turbine, tenths_of(pr[0]), std::nullopt};
          ServiceScore b{s, ScoreMode::Pump, tenths_of(pr[1]), std::nullopt};
          row.turbine[i] = aggregate_hsc(a, b);
        }
        if (c.contains("T")) row.turbine[i] = ServiceScore{s, ScoreMode::Turbine, tenths_of(c["T"]), std::nullopt};
        if (c.contains("P")) row.pump[i] = ServiceScore{s, ScoreMode::Pump, tenths_of(c["P"]), std::nullopt};
      }
    }
    m.rows.push_back(std::move(row));
  }
  validate(m);
  return m;
}

AncillaryServicesMatrix load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

}  // namespace hydroflex::matrix
