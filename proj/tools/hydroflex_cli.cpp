#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hydroflex/campaign/campaign.hpp"
#include "hydroflex/errors.hpp"
#include "hydroflex/unit/characteristic.hpp"

namespace fs = std::filesystem;
using namespace hydroflex;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSimulationFailure = 2;

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(' ');
    const auto b = item.find_last_not_of(' ');
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

// Stack labels contain no commas but do contain '&', so ';' is accepted too.
std::vector<std::string> split_stacks(std::string s) {
  for (auto& c : s) c = c == ';' ? ',' : c;
  return split(s);
}

std::vector<matrix::Format> parse_formats(const std::string& s) {
  std::vector<matrix::Format> out;
  for (const auto& f : split(s)) {
    if (f == "all") return {matrix::Format::Csv, matrix::Format::Json, matrix::Format::Markdown};
    out.push_back(matrix::format_from_string(f));
  }
  if (out.empty()) throw ConfigError("no output format selected");
  return out;
}

bool is_manifest(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("plant_config:", 0) == 0) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hydropower ancillary service qualification and scoring"};
  app.require_subcommand(1);

  std::string input, stacks, services, out, format = "all", published;
  double dt = 0.0;
  unsigned jobs = 0;
  std::size_t trace_every = 0;

  auto* run = app.add_subcommand("run", "Run the test battery and write reports, traces and the matrix");
  run->add_option("config", input, "Plant configuration or campaign manifest")->required();
  run->add_option("--stacks", stacks, "Technology stacks separated by ';' (default: those in the config)");
  run->add_option("--services", services, "Comma separated services or 'all'");
  run->add_option("--dt", dt, "Solver time step [s]");
  run->add_option("--out", out, "Output directory (default: $HYDROFLEX_OUT or ./hydroflex-out)");
  run->add_option("--format", format, "Matrix formats: csv, json, markdown or all");
  run->add_option("--jobs,-j", jobs, "Worker threads (default: hardware concurrency)");
  run->add_option("--trace-every", trace_every, "Write every n-th trace sample");
  run->add_option("--published", published, "Published scores (matrix JSON) for the calibration report");

  auto* validate = app.add_subcommand("validate", "Check a plant configuration without simulating");
  validate->add_option("config", input, "Plant configuration")->required();

  auto* mat = app.add_subcommand("matrix", "Re-render the matrix from the reports of an earlier run");
  mat->add_option("--out", out, "Output directory of the run");
  mat->add_option("--format", format, "Matrix formats: csv, json, markdown or all");
  mat->add_option("--from", published, "Render a score file (matrix JSON) instead of run reports");

  auto* chr = app.add_subcommand("characteristic", "Write the synthetic pump-turbine characteristic as CSV");
  chr->add_option("output", out, "Output CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto diags = plant::validate_plant_config(input);
      for (const auto& d : diags) std::cout << d << "\n";
      if (diags.empty()) std::cout << input << ": ok\n";
      return diags.empty() ? kOk : kConfigError;
    }
    if (*chr) {
      std::ostringstream s;
      unit::synthetic_pump_turbine().write_csv(s);
      io::write_text(out, s.str());
      return kOk;
    }
    if (*mat) {
      const auto formats = parse_formats(format);
      const fs::path dir = out.empty() ? campaign::default_output_dir() : fs::path(out);
      const auto m = published.empty() ? campaign::matrix_from_reports(dir) : matrix::load_json(published);
      campaign::write_matrix(m, dir, formats);
      std::cout << matrix::render_markdown(m);
      return kOk;
    }

    campaign::Options o;
    if (is_manifest(input)) {
      o = campaign::load_manifest(input);
    } else {
      o.config = input;
      o.out = campaign::default_output_dir();
    }
    if (!stacks.empty()) o.stacks = split_stacks(stacks);
    if (!services.empty()) o.services = campaign::parse_services(services);
    if (dt > 0.0) o.dt_s = dt;
    if (!out.empty()) o.out = out;
    if (run->count("--format")) o.formats = parse_formats(format);
    if (jobs) o.jobs = jobs;
    if (trace_every) o.trace_every = trace_every;
    if (!published.empty()) o.published = fs::path(published);

    const auto sum = campaign::run_campaign(o, std::cerr);
    std::cout << matrix::render_markdown(sum.matrix);
    std::cout << "\n" << sum.cells << " cells, " << sum.failed << " failed; output in " << o.out.string() << "\n";
    return sum.failed ? kSimulationFailure : kOk;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSimulationFailure;
  }
}
