#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <string>
#include <sys/wait.h>

#include "floodgsa/campaign.hpp"
#include "floodgsa/kv_config.hpp"
#include "floodgsa/raster.hpp"
#include "test_util.hpp"

namespace floodgsa {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(FLOODGSA_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

TEST(CliUsage, UnknownSubcommandIsAUsageError) { EXPECT_EQ(run_cli("campaign-fly").code, 2); }

TEST(CliUsage, UnknownFlagIsAUsageError) { EXPECT_EQ(run_cli("campaign-status --colour red").code, 2); }

TEST(CliUsage, MalformedFlagValuesAreUsageErrors) {
  EXPECT_EQ(run_cli("campaign-run --workers many").code, 2);
  EXPECT_EQ(run_cli("campaign-run --workers 0").code, 2);
  EXPECT_EQ(run_cli("gsa-converge --point P --fix Q=1").code, 2);
  EXPECT_EQ(run_cli("gsa-converge --point P --fix S=9").code, 2);
}

TEST(CliUsage, MissingSubcommandIsAUsageError) { EXPECT_EQ(run_cli("").code, 2); }

TEST(CliUsage, HelpExitsCleanly) {
  const auto r = run_cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("campaign-run"), std::string::npos);
}

TEST(CliErrors, MissingStoreIsADomainError) {
  testing::TempDir dir;
  const auto r = run_cli("campaign-status --out " + (dir / "nowhere").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("campaign-plan"), std::string::npos) << r.output;
}

TEST(CliUsage, MissingRequiredFlagIsAUsageError) { EXPECT_EQ(run_cli("synth-valley").code, 2); }

TEST(CliErrors, InvalidConfigIsADomainError) {
  testing::TempDir dir;
  write_file_atomic(dir / "bad.cfg", "dtm = nothing.asc\n");
  EXPECT_EQ(run_cli("campaign-plan --config " + (dir / "bad.cfg").string()).code, 1);
}

// A small valley and a short campaign, driven end to end through the binary.
class CliCampaign : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    write_file_atomic(*dir_ / "valley.cfg",
                      "length = 120\nwidth = 100\nchannel_center_y = 50\nchannel_width = 10\ncourtyards = 2\n"
                      "gated_courtyards = 1\ncourtyard_outer = 16\ncourtyard_inner = 8\ngate_width = 3\n"
                      "building_size = 6\nstreet_width = 4\nblock_first_x = 10\nblock_last_x = 100\n"
                      "block_bank_offset = 3\nblock_rows = 2\n");
    synth_ = run_cli("synth-valley --config " + (*dir_ / "valley.cfg").string() + " --out " + (*dir_ / "v").string());
    if (synth_.code != 0) return;
    auto cfg = KeyValueConfig::load(*dir_ / "v" / "campaign.cfg");
    cfg.set("m_levels", "1, 2");
    cfg.set("n_levels", "2, 4");
    cfg.set("x_count", "5");
    cfg.set("t_end", "20");
    cfg.set("output_stride", "10");
    cfg.set("hydrograph", "0:15, 20:40");
    cfg.set("spin_up_time", "30");
    cfg.set("spin_up_ramp", "10");
    cfg.save(*dir_ / "v" / "campaign.cfg");
    config_ = (*dir_ / "v" / "campaign.cfg").string();
    plan_ = run_cli("campaign-plan --config " + config_);
    first_ = run_cli("campaign-run --config " + config_ + " --workers 2");
    second_ = run_cli("campaign-run --config " + config_);
  }
  static void TearDownTestSuite() { delete dir_; }

  static testing::TempDir* dir_;
  static std::string config_;
  static CliRun synth_, plan_, first_, second_;
};
testing::TempDir* CliCampaign::dir_ = nullptr;
std::string CliCampaign::config_;
CliRun CliCampaign::synth_, CliCampaign::plan_, CliCampaign::first_, CliCampaign::second_;

TEST_F(CliCampaign, SynthValleyWritesInputsAndATemplate) {
  ASSERT_EQ(synth_.code, 0) << synth_.output;
  for (const char* f : {"dtm.asc", "buildings.txt", "walls.txt", "street_features.txt", "points.csv", "valley.cfg"}) {
    EXPECT_TRUE(fs::exists(*dir_ / "v" / f)) << f;
  }
  const auto dtm = read_ascii_grid(*dir_ / "v" / "dtm.asc");
  EXPECT_EQ(dtm.cols(), 120u);
  EXPECT_EQ(dtm.rows(), 100u);
  EXPECT_NO_THROW(campaign::CampaignConfig::load(config_).validate(true));
}

TEST_F(CliCampaign, PlanAndRunReportCounts) {
  ASSERT_EQ(plan_.code, 0) << plan_.output;
  EXPECT_NE(plan_.output.find("pending 20"), std::string::npos) << plan_.output;
  ASSERT_EQ(first_.code, 0) << first_.output;
  EXPECT_NE(first_.output.find("executed 20 (done 20, failed 0)"), std::string::npos) << first_.output;
  EXPECT_NE(first_.output.find("S2R4E3 done"), std::string::npos);
}

TEST_F(CliCampaign, SecondRunExecutesNothing) {
  ASSERT_EQ(second_.code, 0) << second_.output;
  EXPECT_NE(second_.output.find("executed 0"), std::string::npos) << second_.output;
  const auto status = run_cli("campaign-status --config " + config_);
  EXPECT_EQ(status.code, 0);
  EXPECT_NE(status.output.find("done 20\nfailed 0\npending 0"), std::string::npos) << status.output;
}

TEST_F(CliCampaign, IndicesAndMaps) {
  const auto ix = run_cli("gsa-indices --config " + config_ + " --out " + (*dir_ / "gsa").string());
  ASSERT_EQ(ix.code, 0) << ix.output;
  const std::string csv = read_file(*dir_ / "gsa" / "indices.csv");
  const auto points = read_points(*dir_ / "v" / "points.csv");
  EXPECT_NE(csv.find(points.front().label + ",S,"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(*dir_ / "gsa" / "samples.csv"));
  EXPECT_NE(read_file(*dir_ / "gsa" / "samples_meta.txt").find("cases 20"), std::string::npos);

  const auto maps = run_cli("gsa-map --config " + config_ + " --out " + (*dir_ / "maps").string());
  ASSERT_EQ(maps.code, 0) << maps.output;
  for (const char* f : {"sobol_S.asc", "sobol_R.asc", "sobol_E.asc"}) {
    const auto m = read_ascii_grid(*dir_ / "maps" / f);
    EXPECT_DOUBLE_EQ(m.cell_size(), 4.0);  // the coarsest resolution in the design
  }
}

TEST_F(CliCampaign, ConvergenceAndDistributions) {
  const auto label = read_points(*dir_ / "v" / "points.csv").front().label;
  const std::string base = "gsa-converge --config " + config_ + " --point " + label + " --out " + (*dir_ / "c").string();
  const auto curve = run_cli(base + " --fix S=2 --fix R=4");
  ASSERT_EQ(curve.code, 0) << curve.output;
  EXPECT_TRUE(fs::exists(*dir_ / "c" / ("convergence_" + label + "_S2R4.csv")));
  EXPECT_NE(curve.output.find(" N = 5"), std::string::npos) << curve.output;
  const auto dist = run_cli(base + " --fix S=1");
  ASSERT_EQ(dist.code, 0) << dist.output;
  EXPECT_TRUE(fs::exists(*dir_ / "c" / ("distributions_" + label + "_S1.csv")));
  EXPECT_EQ(run_cli("gsa-converge --config " + config_ + " --point NOPE --fix S=1").code, 1);
}

TEST_F(CliCampaign, SingleCaseTools) {
  const auto perturb = run_cli("dem-perturb --config " + config_ + " --case S2R4E2 --out " + (*dir_ / "p").string());
  ASSERT_EQ(perturb.code, 0) << perturb.output;
  const auto sim = run_cli("simulate --config " + config_ + " --case S2R4E2 --out " + (*dir_ / "sim").string());
  ASSERT_EQ(sim.code, 0) << sim.output;
  // The stand-alone run reproduces the campaign's case exactly.
  const auto store = campaign::ResultStore::open(campaign::CampaignConfig::load(config_).output_dir);
  const fs::path stored = store.case_dir(dem::CaseId{2, 4, 2});
  EXPECT_EQ(read_file(*dir_ / "sim" / "wse_max.asc"), read_file(stored / "wse_max.asc"));
  EXPECT_EQ(read_ascii_grid(*dir_ / "p" / "S2R4E2.asc"), read_ascii_grid(stored / "dem.asc"));
  const auto build = run_cli("dem-build --config " + config_ + " --out " + (*dir_ / "b").string());
  ASSERT_EQ(build.code, 0) << build.output;
  EXPECT_TRUE(fs::exists(*dir_ / "b" / "S2.asc"));
  EXPECT_EQ(run_cli("simulate --config " + config_ + " --case S9R1E1 --out " + (*dir_ / "x").string()).code, 1);
}

}  // namespace
}  // namespace floodgsa
