#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "hydroflex/campaign/campaign.hpp"
#include "hydroflex/errors.hpp"
#include "hydroflex/io/report_io.hpp"
#include "hydroflex/matrix/matrix.hpp"

using namespace hydroflex;
using namespace hydroflex::matrix;
namespace fs = std::filesystem;

namespace {

const fs::path kData = HYDROFLEX_DATA_DIR;
const fs::path kTestData = HYDROFLEX_TEST_DATA_DIR;

AncillaryServicesMatrix published() { return load_json((kData / "reference" / "published_scores.json").string()); }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hydroflex_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Score, Normalisation) {
  const auto cfg = default_scoring();
  EXPECT_EQ(score_service(Service::Fcr, 186.4, cfg).tenths, 50);
  EXPECT_EQ(score_service(Service::Fcr, 400.0, cfg).tenths, 50);
  EXPECT_EQ(score_service(Service::Fcr, 0.0, cfg).tenths, 0);
  EXPECT_EQ(score_service(Service::Fcr, 93.2, cfg).tenths, 25);
  EXPECT_EQ(score_service(Service::Ffr, 80.0, cfg).tenths, 35);
  EXPECT_EQ(score_service(Service::BlackStart, 113.0, cfg).tenths, 33);
  EXPECT_THROW(score_service(Service::Fcr, -1.0, cfg), ConfigError);
  EXPECT_THROW(score_service(Service::Fcr, 1.0, ScoringConfig{}), ConfigError);
}

TEST(Score, DerivedAndCombined) {
  const ServiceScore a{Service::Afrr, ScoreMode::Pump, 12, {}};
  const auto [m, r] = derive_mfrr_rr(a);
  EXPECT_EQ(m.service, Service::Mfrr);
  EXPECT_EQ(r.service, Service::Rr);
  EXPECT_EQ(m.tenths, 12);
  EXPECT_EQ(derive_mfrr_rr(a, true).first.tenths, 0);
  const auto hsc = aggregate_hsc({Service::Fcr, ScoreMode::Turbine, 50, {}}, {Service::Fcr, ScoreMode::Pump, 12, {}});
  EXPECT_EQ(hsc_cell_text(hsc), "5.0 + 1.2");
  EXPECT_EQ(format_tenths(7), "0.7");
}

TEST(Matrix, GoldenCsvByteForByte) {
  const auto golden = io::read_text(kTestData / "published_golden.csv");
  EXPECT_EQ(render_csv(published()), golden);
}

TEST(Matrix, JsonRoundTrip) {
  const auto m = published();
  const auto text = render_json(m);
  const auto back = parse_json(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(render_json(back), text);
}

TEST(Matrix, NotApplicableAndHscCells) {
  const auto csv = render_csv(published());
  EXPECT_NE(csv.find(kNotApplicable), std::string::npos);
  EXPECT_NE(csv.find(" + "), std::string::npos);
  const auto md = render_markdown(published());
  EXPECT_NE(md.find("| "), std::string::npos);
}

TEST(Matrix, ScoresWithinBounds) {
  for (const auto& row : published().rows) {
    for (const auto* col : {&row.turbine, &row.pump}) {
      for (const auto& s : *col) {
        if (!s) continue;
        EXPECT_GE(s->tenths, 0);
        EXPECT_LE(s->tenths, 50);
      }
    }
  }
}

TEST(Matrix, RejectsOutOfRange) {
  AncillaryServicesMatrix m;
  m.rows.push_back({});
  m.rows[0].turbine[3] = ServiceScore{Service::Fcr, ScoreMode::Turbine, 51, {}};
  EXPECT_THROW(validate(m), ConfigError);
  EXPECT_THROW(parse_json("{\"rows\": 3}"), ConfigError);
  EXPECT_THROW(format_from_string("xml"), ConfigError);
}

TEST(Residuals, IdenticalMatricesAreClean) {
  const auto m = published();
  const auto rs = campaign::calibration_residuals(m, m);
  ASSERT_FALSE(rs.empty());
  for (const auto& r : rs) EXPECT_EQ(r.simulated, r.published);
  EXPECT_NE(campaign::render_residuals(rs).find("Largest absolute residual: 0.0"), std::string::npos);
}

TEST(ReportIo, RoundTrip) {
  qualification::ComplianceReport r;
  r.service = "FCR";
  r.stack = "VS (DFIM)";
  r.mode = "turbine";
  r.capability_mw = 185.88;
  r.add({12.5, "hold", 170.0, 9.3});
  r.metrics["t_i_s"] = 0.4;
  r.notes.push_back("reduced reserve");
  const auto back = io::report_from_json(io::to_json(r));
  EXPECT_EQ(back.service, r.service);
  EXPECT_EQ(back.pass, r.pass);
  EXPECT_EQ(back.capability_mw, r.capability_mw);
  ASSERT_EQ(back.violations.size(), 1u);
  EXPECT_EQ(back.violations[0].quantity, "hold");
  EXPECT_EQ(back.metrics, r.metrics);
  EXPECT_EQ(back.notes, r.notes);
  EXPECT_THROW(io::report_from_json(io::json::object()), ConfigError);
}

TEST(ReportIo, WriteCreatesDirectories) {
  const auto dir = scratch("io");
  const auto file = dir / "a" / "b.txt";
  io::write_text(file, "hello\n");
  EXPECT_EQ(io::read_text(file), "hello\n");
  EXPECT_FALSE(fs::exists(file.string() + ".tmp"));
  EXPECT_THROW(io::read_text(dir / "missing"), ConfigError);
  fs::remove_all(dir);
}

TEST(ReportIo, TraceDecimationKeepsLastSample) {
  plant::Trace t;
  for (int k = 0; k < 25; ++k) {
    t.t.push_back(k * 0.01);
    t.f_hz.push_back(50.0);
    t.plant_mw.push_back(k);
  }
  std::ostringstream out;
  t.write_csv(out, 10);
  const auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 4);
  EXPECT_NE(text.find("0.24"), std::string::npos);
}

TEST(Campaign, ServiceParsing) {
  using campaign::parse_services;
  EXPECT_EQ(parse_services("all").size(), kServices.size());
  const auto s = parse_services("FCR, aFRR,black_start,volt/var, inertia");
  EXPECT_EQ(s.size(), 6u);
  EXPECT_THROW(parse_services(""), ConfigError);
  EXPECT_THROW(parse_services("teleport"), ConfigError);
  const auto e = campaign::evaluated_services(parse_services("rr,mfrr,fcr"));
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], Service::Fcr);
  EXPECT_EQ(e[1], Service::Afrr);
}

TEST(Campaign, BuildRowFromCells) {
  std::vector<campaign::Cell> cells(4);
  cells[0] = {"VS (DFIM)", Service::Fcr, true, false, false, 93.2, 44.57, {}, ""};
  cells[1] = {"VS (DFIM)", Service::Afrr, true, false, false, 93.2, 45.0, {}, ""};
  cells[2] = {"VS (DFIM)", Service::SyncInertia, false, false, false, {}, {}, {}, ""};
  cells[3] = {"VS (DFIM)", Service::BlackStart, true, false, false, {}, {}, {}, "stalled"};
  const auto row = campaign::build_row("FRADES 2", "VS (DFIM)", cells, default_scoring());
  EXPECT_EQ(row.turbine[3]->tenths, 25);
  EXPECT_EQ(row.pump[3]->tenths, 12);
  EXPECT_EQ(row.turbine[5]->tenths, 25);
  EXPECT_EQ(row.pump[6]->tenths, 12);
  EXPECT_FALSE(row.turbine[0].has_value());
  EXPECT_FALSE(row.turbine[8].has_value());
}

TEST(Campaign, HscRowAndFixedPump) {
  std::vector<campaign::Cell> cells(1);
  cells[0] = {"FS & SPSS & HSC", Service::Afrr, true, true, true, 186.4, 0.0, {}, ""};
  const auto row = campaign::build_row("FRADES 2", "FS & SPSS & HSC", cells, default_scoring());
  EXPECT_EQ(hsc_cell_text(*row.turbine[4]), "5.0 + 0.0");
  EXPECT_EQ(hsc_cell_text(*row.turbine[5]), "5.0 + 0.0");
  EXPECT_FALSE(row.pump[4].has_value());
}

TEST(Campaign, CellJsonRoundTrip) {
  campaign::Cell c{"FS", Service::BlackStart, true, false, true, 23.14, {}, {}, ""};
  c.runs.push_back({});
  c.runs[0].report.service = "black start";
  const auto j = campaign::cell_to_json(c, default_scoring());
  EXPECT_EQ(j.at("status"), "ok");
  const auto back = campaign::cell_from_json(j);
  EXPECT_EQ(back.stack, c.stack);
  EXPECT_EQ(back.turbine_mw, c.turbine_mw);
  EXPECT_FALSE(back.pump_mw.has_value());
  ASSERT_EQ(back.runs.size(), 1u);
  c.error = "boom";
  EXPECT_EQ(campaign::cell_to_json(c, default_scoring()).at("status"), "failed");
}

TEST(Campaign, ManifestPathsAreRelative) {
  const auto dir = scratch("manifest");
  io::write_text(dir / "m.yaml",
                 "plant_config: plants/p.yaml\nstacks: [FS, VS (DFIM)]\nservices: [fcr, ffr]\nout: results\n"
                 "dt_s: 0.02\njobs: 2\nformats: [csv]\ntrace_every: 5\n");
  const auto o = campaign::load_manifest(dir / "m.yaml");
  EXPECT_EQ(o.config, dir / "plants" / "p.yaml");
  EXPECT_EQ(o.out, dir / "results");
  ASSERT_EQ(o.stacks.size(), 2u);
  EXPECT_EQ(o.stacks[1], "VS (DFIM)");
  EXPECT_EQ(o.services.size(), 2u);
  EXPECT_DOUBLE_EQ(*o.dt_s, 0.02);
  EXPECT_EQ(o.jobs, 2u);
  EXPECT_EQ(o.trace_every, 5u);
  ASSERT_EQ(o.formats.size(), 1u);
  io::write_text(dir / "bad.yaml", "stacks: [FS]\n");
  EXPECT_THROW(campaign::load_manifest(dir / "bad.yaml"), ConfigError);
  fs::remove_all(dir);
}

TEST(Campaign, MatrixFromReportsNeedsARun) {
  EXPECT_THROW(campaign::matrix_from_reports(scratch("empty")), ConfigError);
}
