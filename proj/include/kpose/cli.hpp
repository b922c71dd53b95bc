#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"
#include "kpose/heatmap.hpp"
#include "kpose/json_io.hpp"
#include "kpose/mesh.hpp"
#include "kpose/metrics.hpp"
#include "kpose/pnp.hpp"
#include "kpose/sampling.hpp"
#include "kpose/simulator.hpp"
#include "kpose/trainmath.hpp"

namespace kpose::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Writes through a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::IoError, "cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline RoiTransform roi_from_file(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  return io::roi_from_json(j.contains("roi") ? j.at("roi") : j);
}

/// Pose list: {"poses": [...]} or a bare array; entries carry object_id, optional id, rotation, translation.
inline std::map<std::pair<std::string, std::string>, Pose> read_pose_list(
    const std::filesystem::path& path, std::vector<std::pair<std::string, std::string>>* order) {
  const auto j = io::read_json(path);
  const auto& arr = j.is_array() ? j : j.at("poses");
  std::map<std::pair<std::string, std::string>, Pose> out;
  std::map<std::string, std::size_t> per_object;
  for (const auto& e : arr) {
    if (!e.contains("object_id")) io::bad("pose entry without object_id in " + path.string());
    const std::string obj = e.at("object_id").get<std::string>();
    std::string id;
    if (e.contains("id")) id = e.at("id").is_string() ? e.at("id").get<std::string>() : e.at("id").dump();
    else id = std::to_string(per_object[obj]);
    ++per_object[obj];
    const std::pair key{obj, id};
    if (out.count(key)) io::bad("duplicate pose entry " + obj + "/" + id + " in " + path.string());
    out.emplace(key, io::pose_from_json(e));
    if (order) order->push_back(key);
  }
  return out;
}

}  // namespace detail

/// Parses argv and runs the selected subcommand.
/// Returns 0 on success, 1 on usage errors, 2 on data errors.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keypoint-based 6D object pose toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --quiet appear after the subcommand name
  bool quiet = false;
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for commands that draw random numbers; ignored by the rest");
  app.add_flag("--quiet", quiet, "Suppress informational output");

  // sample-keypoints
  std::string model, strategy = "fps", out_path, object_id;
  std::size_t k = kDefaultKeypointCount, start = 0, k_neighbors = 16;
  double epsilon = 1e-8;
  bool random_start = false;
  auto* sample_cmd = app.add_subcommand("sample-keypoints", "Select 3D keypoints from a PLY model");
  sample_cmd->add_option("--model", model, "Model PLY file (mm)")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--strategy", strategy, "fps or cps")->check(CLI::IsMember({"fps", "cps"}));
  sample_cmd->add_option("--k", k, "Number of keypoints")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--start", start, "FPS start index");
  sample_cmd->add_flag("--random-start", random_start, "FPS start drawn from --seed");
  sample_cmd->add_option("--k-neighbors", k_neighbors, "CPS neighbourhood size")->check(CLI::Range(4, 1 << 20));
  sample_cmd->add_option("--epsilon", epsilon, "CPS curvature epsilon")->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--object-id", object_id, "Object id (default: model file stem)");
  sample_cmd->add_option("--seed", seed, "Seed for surface densification and random start");
  sample_cmd->add_option("--out", out_path, "Output keypoint JSON")->required();

  // render-heatmaps
  std::string kp2d_path;
  double sigma = kDefaultSigma;
  std::size_t size = kHeatmapSize;
  auto* render_cmd = app.add_subcommand("render-heatmaps", "Render Gaussian heatmaps from 2D keypoints");
  render_cmd->add_option("--keypoints", kp2d_path, "2D keypoint JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--sigma", sigma, "Gaussian sigma (heatmap px)")->check(CLI::PositiveNumber);
  render_cmd->add_option("--size", size, "Heatmap side length")->check(CLI::Range(1, 4096));
  render_cmd->add_option("--out", out_path, "Output HMAP file")->required();

  // decode-heatmaps
  std::string hmap_path, roi_path;
  auto* decode_cmd = app.add_subcommand("decode-heatmaps", "Argmax-decode a heatmap stack");
  decode_cmd->add_option("--heatmaps", hmap_path, "HMAP file")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--roi", roi_path, "ROI JSON; maps peaks back to original image pixels")
      ->check(CLI::ExistingFile);
  decode_cmd->add_option("--out", out_path, "Output 2D keypoint JSON")->required();

  // estimate-pose
  std::string kp3d_path, intr_path;
  double threshold = 3.0, confidence = 0.999, min_peak = 0.1;
  int iterations = 300;
  std::size_t min_inliers = 6;
  auto* pose_cmd = app.add_subcommand("estimate-pose", "PnP + RANSAC pose from 2D-3D keypoints");
  pose_cmd->add_option("--keypoints3d", kp3d_path, "3D keypoint JSON")->required()->check(CLI::ExistingFile);
  pose_cmd->add_option("--keypoints2d", kp2d_path, "2D keypoint JSON")->required()->check(CLI::ExistingFile);
  pose_cmd->add_option("--intrinsics", intr_path, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  pose_cmd->add_option("--threshold", threshold, "Inlier reprojection threshold (px)")->check(CLI::PositiveNumber);
  pose_cmd->add_option("--iterations", iterations, "Maximum RANSAC iterations")->check(CLI::Range(1, 1 << 30));
  pose_cmd->add_option("--confidence", confidence, "Early-exit confidence")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  pose_cmd->add_option("--min-inliers", min_inliers, "Minimum consensus size");
  pose_cmd->add_option("--min-peak", min_peak, "Drop 2D keypoints whose heatmap peak is below this");
  pose_cmd->add_option("--seed", seed, "RANSAC seed");
  pose_cmd->add_option("--out", out_path, "Output pose JSON")->required();

  // evaluate
  std::string pred_path, gt_path, models_dir, symmetric_list;
  double fraction = kDefaultDiameterFraction;
  auto* eval_cmd = app.add_subcommand("evaluate", "ADD / ADD-S accuracy under the diameter rule");
  eval_cmd->add_option("--pred", pred_path, "Predicted poses JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", gt_path, "Ground-truth poses JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--models", models_dir, "Directory of <object_id>.ply models")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--symmetric", symmetric_list, "Comma-separated symmetric object ids (ADD-S)");
  eval_cmd->add_option("--fraction", fraction, "Diameter fraction threshold")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", out_path, "Output CSV")->required();

  // simulate
  std::size_t n_samples = 500;
  double pixel_noise = 0.0, outliers = 0.0, dropout = 0.0, bbox_jitter = 0.0;
  bool symmetric = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Synthetic end-to-end benchmark on one model");
  sim_cmd->add_option("--model", model, "Model PLY file (mm)")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--strategy", strategy, "fps or cps")->check(CLI::IsMember({"fps", "cps"}));
  sim_cmd->add_option("--k", k, "Number of keypoints")->check(CLI::Range(6, 1 << 20));
  sim_cmd->add_option("--n", n_samples, "Number of samples")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--pixel-noise", pixel_noise, "Keypoint noise sigma (px)")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--outliers", outliers, "Outlier fraction")->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--dropout", dropout, "Dropout fraction")->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--bbox-jitter", bbox_jitter, "Bounding box jitter sigma (px)")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--threshold", threshold, "RANSAC reprojection threshold (px)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--intrinsics", intr_path, "Camera intrinsics JSON (default: LINEMOD)")->check(CLI::ExistingFile);
  sim_cmd->add_flag("--symmetric", symmetric, "Score with ADD-S");
  sim_cmd->add_option("--seed", seed, "Master seed");
  sim_cmd->add_option("--out", out_path, "Per-sample CSV")->required();

  // plot-schedule
  std::string variant = "onecycle";
  long steps = 26700;
  double base_lr = kDefaultBaseLr, warmup = 0.3;
  auto* sched_cmd = app.add_subcommand(
      "plot-schedule",
      "Learning-rate schedule as (step, lr) rows. total_steps = epochs * ceil(train_images / batch); "
      "the default 26700 corresponds to 30 epochs of 890 iterations at batch size 16");
  sched_cmd->add_option("--variant", variant, "constant, onecycle or polynomial")
      ->check(CLI::IsMember({"constant", "onecycle", "polynomial"}));
  sched_cmd->add_option("--steps", steps, "Total steps")->check(CLI::Range(1L, 1L << 40));
  sched_cmd->add_option("--base-lr", base_lr, "Base learning rate")->check(CLI::PositiveNumber);
  sched_cmd->add_option("--warmup", warmup, "OneCycle warm-up fraction")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  sched_cmd->add_option("--out", out_path, "Output CSV")->required();

  // model-info
  auto* info_cmd = app.add_subcommand("model-info", "Vertex count, centroid and diameter of a PLY model");
  info_cmd->add_option("--model", model, "Model PLY file (mm)")->required()->check(CLI::ExistingFile);
  info_cmd->add_option("--out", out_path, "Optional JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto info = [&](const std::string& msg) {
    if (!quiet) out << msg << "\n";
  };

  try {
    if (sample_cmd->parsed()) {
      const TriangleMesh mesh = load_ply(model);
      SelectionOptions sel;
      sel.strategy = parse_strategy(strategy);
      sel.k = k;
      sel.curvature = {k_neighbors, epsilon};
      sel.densify_seed = seed;
      if (random_start) {
        Rng rng(seed);
        sel.fps_start = static_cast<std::size_t>(rng.below(mesh.vertices.size()));
      } else {
        sel.fps_start = start;
      }
      const std::string id = object_id.empty() ? std::filesystem::path(model).stem().string() : object_id;
      const KeypointSet kp = select_keypoints(mesh, sel, id);
      write_json(out_path, io::to_json(kp));
      info("selected " + std::to_string(kp.points.size()) + " keypoints (" + strategy + ")");
    } else if (render_cmd->parsed()) {
      const auto kp = io::keypoints2d_from_json(io::read_json(kp2d_path));
      std::vector<Vec2> hm;
      hm.reserve(kp.points.size());
      RoiTransform roi;
      if (kp.roi) {
        roi = *kp.roi;
        roi.heatmap_size = Vec2::Constant(static_cast<double>(size));
      }
      for (const auto& p : kp.points) {
        if (!p) hm.push_back(Vec2::Constant(std::numeric_limits<double>::quiet_NaN()));
        else hm.push_back(kp.roi ? original_to_heatmap(roi, *p) : *p);
      }
      const HeatmapStack stack = render(hm, GaussianParams{sigma}, size, size);
      write_file_atomic(out_path, encode_hmap(stack));
      info("rendered " + std::to_string(stack.channels) + " channels at " + std::to_string(size) + "x" +
           std::to_string(size));
    } else if (decode_cmd->parsed()) {
      const HeatmapStack stack = read_hmap(hmap_path);
      io::Keypoints2D res;
      std::optional<RoiTransform> roi;
      if (!roi_path.empty()) {
        roi = detail::roi_from_file(roi_path);
        roi->heatmap_size = Vec2(static_cast<double>(stack.width), static_cast<double>(stack.height));
        res.roi = roi;
      }
      for (const auto& d : decode(stack)) {
        res.points.emplace_back(roi ? heatmap_to_original(*roi, d.position) : d.position);
        res.peaks.push_back(d.peak);
      }
      write_json(out_path, io::to_json(res));
      info("decoded " + std::to_string(res.points.size()) + " keypoints");
    } else if (pose_cmd->parsed()) {
      const KeypointSet kp3 = io::keypoints_from_json(io::read_json(kp3d_path));
      const auto kp2 = io::keypoints2d_from_json(io::read_json(kp2d_path));
      const CameraIntrinsics intr = io::intrinsics_from_json(io::read_json(intr_path));
      if (kp3.points.size() != kp2.points.size())
        throw Error(ErrorKind::ShapeMismatch, "3D and 2D keypoint files differ in length");
      CorrespondenceSet corr;
      std::vector<std::size_t> used;
      for (std::size_t i = 0; i < kp2.points.size(); ++i) {
        if (!kp2.points[i]) continue;
        if (!kp2.peaks.empty() && kp2.peaks[i] < min_peak) continue;
        corr.points_3d.push_back(kp3.points[i]);
        corr.points_2d.push_back(*kp2.points[i]);
        used.push_back(i);
      }
      RansacConfig rc;
      rc.reproj_threshold = threshold;
      rc.max_iterations = iterations;
      rc.confidence = confidence;
      rc.min_inliers = min_inliers;
      rc.seed = seed;
      const PoseEstimate est = solve_pnp_ransac(corr, intr, rc);
      nlohmann::json j = io::to_json(est.pose);
      std::vector<bool> mask(kp2.points.size(), false);
      for (std::size_t u = 0; u < used.size(); ++u) mask[used[u]] = est.inlier_mask[u];
      j["inliers"] = mask;
      j["n_inliers"] = est.inlier_count();
      j["n_correspondences"] = corr.size();
      j["mean_reproj_error_px"] = est.mean_reproj_error;
      j["ransac_iterations"] = est.iterations;
      write_json(out_path, j);
      info("pose estimated with " + std::to_string(est.inlier_count()) + "/" + std::to_string(corr.size()) +
           " inliers");
    } else if (eval_cmd->parsed()) {
      std::vector<std::pair<std::string, std::string>> order;
      const auto gt = detail::read_pose_list(gt_path, &order);
      const auto pred = detail::read_pose_list(pred_path, nullptr);
      const auto sym = detail::split_list(symmetric_list);
      std::map<std::string, PointCloud> models;
      std::vector<EvalInput> inputs;
      for (const auto& key : order) {
        auto mit = models.find(key.first);
        if (mit == models.end()) {
          const auto path = std::filesystem::path(models_dir) / (key.first + ".ply");
          mit = models.emplace(key.first, load_ply(path).vertices).first;
        }
        EvalInput in;
        in.gt = gt.at(key);
        if (auto p = pred.find(key); p != pred.end()) in.pred = p->second;
        in.model = &mit->second;
        in.object_id = key.first;
        in.symmetric = std::find(sym.begin(), sym.end(), key.first) != sym.end();
        inputs.push_back(in);
      }
      const EvalSummary s = evaluate(inputs, fraction);
      std::string csv = "object_id,n,accuracy,metric\n";
      std::size_t total = 0;
      for (const auto& o : s.per_object) {
        csv += o.object_id + "," + std::to_string(o.total) + "," + sim::format_number(o.accuracy()) + "," +
               (o.symmetric ? "adds" : "add") + "\n";
        total += o.total;
      }
      csv += "mean," + std::to_string(total) + "," + sim::format_number(s.mean_accuracy) + ",mixed\n";
      write_file_atomic(out_path, csv);
      info("mean accuracy " + sim::format_number(s.mean_accuracy) + " over " +
           std::to_string(s.per_object.size()) + " objects");
    } else if (sim_cmd->parsed()) {
      sim::SceneConfig sc;
      sc.model_path = model;
      sc.object_id = std::filesystem::path(model).stem().string();
      sc.symmetric = symmetric;
      sc.strategy = parse_strategy(strategy);
      sc.n_keypoints = k;
      sc.n_samples = n_samples;
      if (!intr_path.empty()) sc.intrinsics = io::intrinsics_from_json(io::read_json(intr_path));
      sc.seed = seed;
      sim::NoiseConfig nc;
      nc.pixel_noise_sigma = pixel_noise;
      nc.outlier_fraction = outliers;
      nc.dropout_fraction = dropout;
      nc.bbox_jitter = bbox_jitter;
      nc.seed = seed;
      RansacConfig rc;
      rc.reproj_threshold = threshold;
      rc.seed = seed;
      const sim::Scene scene = sim::generate_scene(sc);
      const sim::PipelineResult res = sim::run_pipeline(scene, nc, rc);
      write_file_atomic(out_path, sim::format_csv(res));
      info("accuracy " + sim::format_number(res.summary.mean_accuracy) + " (" + std::to_string(res.correct) +
           "/" + std::to_string(res.samples.size()) + "), diameter " + sim::format_number(scene.diameter) + " mm");
    } else if (sched_cmd->parsed()) {
      ScheduleConfig cfg;
      cfg.variant = parse_schedule_variant(variant);
      cfg.base_lr = base_lr;
      cfg.total_steps = steps;
      cfg.warmup_fraction = warmup;
      cfg.max_lr = 10.0 * base_lr;
      cfg.final_lr = base_lr / 1e4;
      std::string csv = "step,lr\n";
      for (long s = 0; s <= steps; ++s) csv += std::to_string(s) + "," + sim::format_number(lr_at(cfg, s)) + "\n";
      write_file_atomic(out_path, csv);
      info("wrote " + std::to_string(steps + 1) + " schedule rows");
    } else if (info_cmd->parsed()) {
      const TriangleMesh mesh = load_ply(model);
      const Vec3 c = centroid(mesh.vertices);
      const double d = mesh.vertices.size() >= 2 ? diameter(mesh.vertices) : 0.0;
      std::ostringstream msg;
      msg << std::setprecision(10) << "vertices: " << mesh.vertices.size() << "\n"
          << "faces: " << mesh.faces.size() << "\n"
          << "centroid: " << c.x() << " " << c.y() << " " << c.z() << "\n"
          << "diameter: " << d;
      out << msg.str() << "\n";
      if (!out_path.empty()) {
        write_json(out_path, {{"vertices", mesh.vertices.size()},
                              {"faces", mesh.faces.size()},
                              {"centroid", {c.x(), c.y(), c.z()}},
                              {"diameter", d}});
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: ParseError: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace kpose::cli
