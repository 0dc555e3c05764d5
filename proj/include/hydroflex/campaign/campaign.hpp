#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hydroflex/io/report_io.hpp"
#include "hydroflex/matrix/matrix.hpp"
#include "hydroflex/plant/config.hpp"
#include "hydroflex/qualification/tests.hpp"

namespace hydroflex::campaign {

/// Comma separated service ids, or "all". mfrr and rr select the aFRR
/// simulation they are derived from; "inertia" selects both inertia services.
std::vector<matrix::Service> parse_services(const std::string& list);
/// Services that are actually evaluated, in matrix order.
std::vector<matrix::Service> evaluated_services(const std::vector<matrix::Service>& requested);

/// One (stack, service) evaluation.
struct Cell {
  std::string stack;
  matrix::Service service = matrix::Service::Fcr;
  bool applicable = true;
  bool hsc = false;
  bool fixed_speed = false;
  std::optional<double> turbine_mw;
  std::optional<double> pump_mw;
  std::vector<qualification::TestRun> runs;
  std::string error;

  bool failed() const { return !error.empty(); }
};

/// Runs the tests behind one matrix cell. Simulation failures are caught and
/// recorded in `error`.
Cell run_cell(const plant::PlantSimulator& sim, matrix::Service service);

io::json cell_to_json(const Cell& c, const matrix::ScoringConfig& scoring);
/// Restores everything but the traces.
Cell cell_from_json(const io::json& j);

/// Scores of one stack. Services without a cell are left empty.
matrix::MatrixRow build_row(const std::string& demonstrator, const std::string& stack, const std::vector<Cell>& cells,
                            const matrix::ScoringConfig& scoring);

struct Residual {
  std::string demonstrator;
  std::string stack;
  matrix::Service service = matrix::Service::Fcr;
  std::string column;  // "T", "P", "T (HSC)", "P (HSC)"
  std::optional<int> simulated;  // tenths, empty when not applicable
  std::optional<int> published;
};

/// Cell by cell comparison for rows present in both matrices.
std::vector<Residual> calibration_residuals(const matrix::AncillaryServicesMatrix& simulated,
                                            const matrix::AncillaryServicesMatrix& published);
std::string render_residuals(const std::vector<Residual>& r);

struct Options {
  std::filesystem::path config;
  std::vector<std::string> stacks;  // empty: the stacks listed in the config
  std::vector<matrix::Service> services;
  std::optional<double> dt_s;
  std::filesystem::path out = "hydroflex-out";
  std::vector<matrix::Format> formats{matrix::Format::Csv, matrix::Format::Json, matrix::Format::Markdown};
  unsigned jobs = 0;  // 0: hardware concurrency
  std::size_t trace_every = 10;
  std::optional<std::filesystem::path> published;  // published scores for the residual report
};

/// Campaign manifest: plant_config, stacks, services, out, dt_s, jobs,
/// formats, trace_every, published_scores. Paths are relative to the manifest.
Options load_manifest(const std::filesystem::path& path);

struct Summary {
  std::size_t cells = 0;
  std::size_t failed = 0;
  matrix::AncillaryServicesMatrix matrix;
  std::vector<Residual> residuals;
};

/// Runs every (stack, service) cell on a worker pool and writes
/// cells/<stack>__<service>.json, traces/<stack>__<service>__<mode>.csv,
/// matrix.{csv,json,md} and, when published scores are available,
/// calibration.md.
Summary run_campaign(const Options& o, std::ostream& log);

/// Rebuilds the matrix from the cell reports of an earlier run.
matrix::AncillaryServicesMatrix matrix_from_reports(const std::filesystem::path& out_dir);
/// Writes the matrix files in the requested formats.
void write_matrix(const matrix::AncillaryServicesMatrix& m, const std::filesystem::path& out_dir,
                  const std::vector<matrix::Format>& formats);

/// Default output directory, HYDROFLEX_OUT or "hydroflex-out".
std::filesystem::path default_output_dir();

}  // namespace hydroflex::campaign
