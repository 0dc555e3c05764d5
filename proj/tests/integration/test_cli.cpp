#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "hydroflex/io/report_io.hpp"

namespace fs = std::filesystem;
using namespace hydroflex;

namespace {

const fs::path kConfig = fs::path(HYDROFLEX_DATA_DIR) / "reference" / "frades_like.yaml";

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + HYDROFLEX_CLI + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hydroflex_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count_files(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST(Cli, ValidateExitCodes) {
  EXPECT_EQ(cli("validate " + q(kConfig)), 0);
  EXPECT_EQ(cli("validate /nonexistent/plant.yaml"), 1);
  const auto dir = scratch("validate");
  auto text = io::read_text(kConfig);
  text.replace(text.find("middle: 365.5"), 13, "middle: 400.0");
  io::write_text(dir / "frades_like.yaml", text);
  fs::copy_file(kConfig.parent_path() / "frades_like_characteristic.csv", dir / "frades_like_characteristic.csv");
  EXPECT_EQ(cli("validate " + q(dir / "frades_like.yaml")), 1);
  EXPECT_EQ(cli("run " + q(dir / "frades_like.yaml") + " --out " + q(dir / "out")), 1);
  EXPECT_NE(cli("frobnicate"), 0);
}

TEST(Cli, SingleCellWritesOneReport) {
  const auto out = scratch("single");
  ASSERT_EQ(cli("run " + q(kConfig) + " --stacks \"VS (DFIM)\" --services fcr --out " + q(out)), 0);
  EXPECT_EQ(count_files(out / "cells"), 1u);
  EXPECT_TRUE(fs::exists(out / "cells" / "vs_dfim__fcr.json"));
  for (const char* f : {"matrix.csv", "matrix.json", "matrix.md", "campaign.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto cell = io::json::parse(io::read_text(out / "cells" / "vs_dfim__fcr.json"));
  EXPECT_EQ(cell.at("status"), "ok");
  EXPECT_GT(count_files(out / "traces"), 0u);
}

TEST(Cli, EnvironmentSetsOutputDirectory) {
  const auto out = scratch("env");
  const std::string env = "HYDROFLEX_OUT=" + q(out) + " ";
  const std::string cmd = env + "\"" + HYDROFLEX_CLI + "\" run " + q(kConfig) +
                          " --stacks FS --services volt-var >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(out / "cells" / "fs__volt-var.json"));
}

TEST(Cli, FailedCellIsIsolated) {
  const auto dir = scratch("failing");
  auto text = io::read_text(kConfig);
  const std::string key = "    grid_forming_capable: true\n";
  text.replace(text.find(key), key.size(), key + "    converter_rating_mw: 200.0\n");
  io::write_text(dir / "frades_like.yaml", text);
  fs::copy_file(kConfig.parent_path() / "frades_like_characteristic.csv", dir / "frades_like_characteristic.csv");
  const auto out = dir / "out";
  EXPECT_EQ(cli("run " + q(dir / "frades_like.yaml") + " --stacks \"VS (DFIM)\" --services synth-inertia,volt-var --out " +
                q(out)),
            2);
  const auto bad = io::json::parse(io::read_text(out / "cells" / "vs_dfim__synth-inertia.json"));
  EXPECT_EQ(bad.at("status"), "failed");
  const auto good = io::json::parse(io::read_text(out / "cells" / "vs_dfim__volt-var.json"));
  EXPECT_EQ(good.at("status"), "ok");
  EXPECT_NE(io::read_text(out / "matrix.csv").find("NA"), std::string::npos);
}

TEST(Cli, FullBatteryAndMatrixRerender) {
  const auto out = scratch("full");
  ASSERT_EQ(cli("run " + q(kConfig) + " --out " + q(out)), 0);
  EXPECT_GE(count_files(out / "cells"), 30u);
  EXPECT_TRUE(fs::exists(out / "calibration.md"));
  const auto csv = io::read_text(out / "matrix.csv");
  fs::remove(out / "matrix.csv");
  ASSERT_EQ(cli("matrix --out " + q(out) + " --format csv"), 0);
  EXPECT_EQ(io::read_text(out / "matrix.csv"), csv);
}

TEST(Cli, MatrixFromScoreFile) {
  const auto out = scratch("from");
  const auto scores = kConfig.parent_path() / "published_scores.json";
  ASSERT_EQ(cli("matrix --from " + q(scores) + " --out " + q(out) + " --format csv"), 0);
  EXPECT_EQ(io::read_text(out / "matrix.csv"),
            io::read_text(fs::path(HYDROFLEX_TEST_DATA_DIR) / "published_golden.csv"));
}

TEST(Cli, ManifestRun) {
  const auto dir = scratch("manifest");
  io::write_text(dir / "campaign.yaml", "plant_config: " + kConfig.string() +
                                            "\nstacks: [FS]\nservices: [black-start]\nout: results\nformats: [json]\n");
  ASSERT_EQ(cli("run " + q(dir / "campaign.yaml")), 0);
  EXPECT_TRUE(fs::exists(dir / "results" / "cells" / "fs__black-start.json"));
  EXPECT_TRUE(fs::exists(dir / "results" / "matrix.json"));
  EXPECT_FALSE(fs::exists(dir / "results" / "matrix.csv"));
}
