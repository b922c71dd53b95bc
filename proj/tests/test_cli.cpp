#include <gtest/gtest.h>

#include "cli_scenario.hpp"
#include "test_util.hpp"

using namespace kpose;
using testutil::run_cli;
using testutil::slurp;

TEST(Cli, ModelInfoOnCube) {
  const auto r = run_cli({"model-info", "--model", (testutil::data_dir() / "cube.ply").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("vertices: 8"), std::string::npos);
  EXPECT_NE(r.out.find("diameter: 1.732050808"), std::string::npos);
  EXPECT_NE(r.out.find("centroid: 0.5 0.5 0.5"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  const auto cube = (testutil::data_dir() / "cube.ply").string();
  const auto dir = testutil::scratch_dir("cli_usage");
  auto r = run_cli({"sample-keypoints", "--model", cube, "--k", "0", "--out", (dir / "k.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("usage error"), std::string::npos);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"no-such-command"}).code, 1);
  EXPECT_EQ(run_cli({"plot-schedule", "--variant", "cosine", "--out", (dir / "x.csv").string()}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, DataErrors) {
  const auto cube = (testutil::data_dir() / "cube.ply").string();
  const auto dir = testutil::scratch_dir("cli_data");
  // k larger than the cloud.
  auto r = run_cli({"sample-keypoints", "--model", cube, "--k", "9", "--out", (dir / "k.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "k.json"));

  std::ofstream(dir / "bad.ply") << "ply\nformat ascii 1.0\nelement vertex 3\nend_header\n";
  r = run_cli({"model-info", "--model", (dir / "bad.ply").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ParseError"), std::string::npos);
}

TEST(Cli, FpsOnCube) {
  const auto dir = testutil::scratch_dir("cli_fps");
  const auto out = dir / "kp.json";
  ASSERT_EQ(run_cli({"sample-keypoints", "--quiet", "--model", (testutil::data_dir() / "cube.ply").string(),
                     "--k", "3", "--out", out.string()})
                .code,
            0);
  const auto j = io::read_json(out);
  EXPECT_EQ(j["object_id"], "cube");
  EXPECT_EQ(j["strategy"], "fps");
  EXPECT_EQ(j["source_indices"], nlohmann::json({0, 7, 1}));
}

TEST(Cli, FullPipelineScenario) {
  const auto dir = testutil::scratch_dir("cli_pipeline");
  const auto outs = testutil::run_scenario(dir);
  ASSERT_EQ(outs.size(), 8u);
  for (const auto& o : outs) EXPECT_EQ(o.code, 0) << o.subcommand;

  const auto pose = io::read_json(dir / "pose.json");
  EXPECT_EQ(pose["n_correspondences"], 50);
  EXPECT_GE(pose["n_inliers"].get<int>(), 45);

  const std::string eval = slurp(dir / "eval.csv");
  EXPECT_EQ(eval, "object_id,n,accuracy,metric\nbox,1,1,add\nmean,1,1,mixed\n");

  const std::string lr = slurp(dir / "lr.csv");
  EXPECT_EQ(lr.substr(0, 8), "step,lr\n");
  EXPECT_EQ(std::count(lr.begin(), lr.end(), '\n'), 2002);

  const auto hm = read_hmap(dir / "hm.hmap");
  EXPECT_EQ(hm.channels, 50u);
  EXPECT_EQ(hm.height, 64u);

  const auto decoded = io::keypoints2d_from_json(io::read_json(dir / "kp2d.json"));
  ASSERT_TRUE(decoded.roi.has_value());
  EXPECT_EQ(decoded.peaks.size(), 50u);
}

TEST(Cli, RepeatedRunsAreIdempotent) {
  const auto dir = testutil::scratch_dir("cli_idem");
  const auto first = testutil::run_scenario(dir);
  std::vector<std::string> bytes;
  for (const auto& o : first) bytes.push_back(slurp(o.file));
  const auto second = testutil::run_scenario(dir);
  ASSERT_EQ(second.size(), first.size());
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(slurp(second[i].file), bytes[i]) << first[i].subcommand;
}

TEST(Cli, HelpOnEverySubcommand) {
  for (const char* sub : {"sample-keypoints", "render-heatmaps", "decode-heatmaps", "estimate-pose", "evaluate",
                          "simulate", "plot-schedule", "model-info"}) {
    const auto r = run_cli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, GlobalFlagsAfterAnySubcommand) {
  const auto dir = testutil::scratch_dir("cli_global");
  const auto out = dir / "lr.csv";
  EXPECT_EQ(run_cli({"plot-schedule", "--steps", "10", "--seed", "3", "--quiet", "--out", out.string()}).code, 0);
  EXPECT_EQ(run_cli({"--quiet", "plot-schedule", "--steps", "10", "--out", out.string()}).out, "");
}
