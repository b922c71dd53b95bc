#pragma once

// Drives every CLI subcommand in-process on a small synthetic scene.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kpose/cli.hpp"
#include "kpose/json_io.hpp"
#include "kpose/shapes.hpp"

namespace testutil {

struct CliRun {
  int code = -1;
  std::string out, err;
};

inline CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kpose");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = kpose::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct ScenarioOutput {
  std::string subcommand;
  std::filesystem::path file;  // empty when the product is stdout
  std::string stdout_text;
  int code = -1;
};

/// Writes the inputs into `dir` and runs each subcommand once, in pipeline order.
inline std::vector<ScenarioOutput> run_scenario(const std::filesystem::path& dir) {
  using namespace kpose;
  namespace fs = std::filesystem;
  fs::create_directories(dir / "models");
  const fs::path model = dir / "models" / "box.ply";
  write_ply(model, shapes::box(100, 80, 60, 4));

  const CameraIntrinsics intr = sim::linemod_intrinsics();
  cli::write_json(dir / "camera.json", io::to_json(intr));

  std::vector<ScenarioOutput> outs;
  auto step = [&](const std::string& name, std::vector<std::string> args, const fs::path& file) {
    args.insert(args.begin(), name);
    const CliRun r = run_cli(args);
    outs.push_back({name, file, r.out, r.code});
    return r.code == 0;
  };
  const auto s = [](const fs::path& p) { return p.string(); };

  if (!step("sample-keypoints",
            {"--quiet", "--model", s(model), "--strategy", "cps", "--k", "50", "--seed", "3", "--out",
             s(dir / "kp3d.json")},
            dir / "kp3d.json"))
    return outs;

  // Ground-truth view of the keypoints, with an roi around them.
  const KeypointSet kp3 = io::keypoints_from_json(io::read_json(dir / "kp3d.json"));
  Pose gt;
  gt.rotation = axis_angle_to_matrix(Vec3(0.3, -0.5, 0.2));
  gt.translation = Vec3(15, -10, 700);
  std::vector<Vec2> proj;
  for (const auto& p : kp3.points) proj.push_back(project(intr, transform_point(gt, p)));
  io::Keypoints2D kp2;
  for (const auto& p : proj) kp2.points.emplace_back(p);
  kp2.roi = sim::tight_roi(proj, 0.1);
  cli::write_json(dir / "kp2d_gt.json", io::to_json(kp2));

  if (!step("render-heatmaps", {"--quiet", "--keypoints", s(dir / "kp2d_gt.json"), "--out", s(dir / "hm.hmap")},
            dir / "hm.hmap"))
    return outs;
  if (!step("decode-heatmaps",
            {"--quiet", "--heatmaps", s(dir / "hm.hmap"), "--roi", s(dir / "kp2d_gt.json"), "--out",
             s(dir / "kp2d.json")},
            dir / "kp2d.json"))
    return outs;
  if (!step("estimate-pose",
            {"--quiet", "--keypoints3d", s(dir / "kp3d.json"), "--keypoints2d", s(dir / "kp2d.json"),
             "--intrinsics", s(dir / "camera.json"), "--seed", "11", "--out", s(dir / "pose.json")},
            dir / "pose.json"))
    return outs;

  nlohmann::json pred_entry = io::read_json(dir / "pose.json");
  nlohmann::json pred = {{"poses", nlohmann::json::array()}};
  pred["poses"].push_back({{"object_id", "box"}, {"id", 0},
                           {"rotation", pred_entry["rotation"]}, {"translation", pred_entry["translation"]}});
  nlohmann::json gtj = io::to_json(gt);
  gtj["object_id"] = "box";
  gtj["id"] = 0;
  cli::write_json(dir / "pred.json", pred);
  cli::write_json(dir / "gt.json", nlohmann::json{{"poses", {gtj}}});

  if (!step("evaluate",
            {"--quiet", "--pred", s(dir / "pred.json"), "--gt", s(dir / "gt.json"), "--models",
             s(dir / "models"), "--out", s(dir / "eval.csv")},
            dir / "eval.csv"))
    return outs;
  step("simulate",
       {"--quiet", "--model", s(model), "--n", "20", "--pixel-noise", "1.0", "--outliers", "0.1", "--dropout",
        "0.1", "--bbox-jitter", "1.0", "--seed", "5", "--out", s(dir / "sim.csv")},
       dir / "sim.csv");
  step("plot-schedule", {"--quiet", "--variant", "onecycle", "--steps", "2000", "--out", s(dir / "lr.csv")},
       dir / "lr.csv");
  step("model-info", {"--model", s(model), "--out", s(dir / "info.json")}, dir / "info.json");
  return outs;
}

}  // namespace testutil
