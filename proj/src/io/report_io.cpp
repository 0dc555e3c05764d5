#include "hydroflex/io/report_io.hpp"

#include <fstream>
#include <sstream>

#include "hydroflex/errors.hpp"

namespace hydroflex::io {

namespace fs = std::filesystem;

json to_json(const qualification::ComplianceReport& r) {
  json v = json::array();
  for (const auto& x : r.violations) {
    v.push_back({{"time_s", x.time_s}, {"quantity", x.quantity}, {"value", x.value}, {"bound", x.bound}});
  }
  json j = {{"service", r.service},
            {"stack", r.stack},
            {"mode", r.mode},
            {"pass", r.pass},
            {"capability_mw", r.capability_mw},
            {"violations", v},
            {"metrics", r.metrics},
            {"notes", r.notes}};
  if (!r.trace_file.empty()) j["trace_file"] = r.trace_file;
  return j;
}

qualification::ComplianceReport report_from_json(const json& j) {
  try {
    qualification::ComplianceReport r;
    r.service = j.at("service").get<std::string>();
    r.stack = j.at("stack").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.pass = j.at("pass").get<bool>();
    r.capability_mw = j.at("capability_mw").get<double>();
    for (const auto& v : j.at("violations")) {
      r.violations.push_back({v.at("time_s").get<double>(), v.at("quantity").get<std::string>(),
                              v.at("value").get<double>(), v.at("bound").get<double>()});
    }
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    if (j.contains("trace_file")) r.trace_file = j["trace_file"].get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report JSON: ") + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_trace_csv(const fs::path& path, const plant::Trace& trace, std::size_t every) {
  std::ostringstream out;
  trace.write_csv(out, every);
  write_text(path, out.str());
}

}  // namespace hydroflex::io
