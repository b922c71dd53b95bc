#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"
#include "kpose/heatmap.hpp"
#include "kpose/mesh.hpp"
#include "kpose/metrics.hpp"
#include "kpose/pnp.hpp"
#include "kpose/random.hpp"
#include "kpose/sampling.hpp"

// Synthetic stand-in for detector + heatmap network: known poses are
// projected, corrupted, rendered to heatmaps, decoded and fed to PnP.

namespace kpose::sim {

/// LINEMOD's Kinect intrinsics.
inline CameraIntrinsics linemod_intrinsics() { return {572.4114, 573.57043, 325.2611, 242.04899}; }

struct SceneConfig {
  std::string model_path;
  std::string object_id = "object";
  bool symmetric = false;
  SamplingStrategy strategy = SamplingStrategy::FPS;
  std::size_t n_keypoints = kDefaultKeypointCount;
  std::size_t n_samples = 100;
  double xy_range_mm = 100.0;  // x, y uniform in [-range, range]
  double z_min_mm = 400.0;
  double z_max_mm = 1500.0;
  double bbox_padding = 0.1;   // fraction of the tight keypoint extent added per side
  CameraIntrinsics intrinsics = linemod_intrinsics();
  std::uint64_t seed = 0;
};

struct NoiseConfig {
  double pixel_noise_sigma = 0.0;  // px, Gaussian on keypoint locations
  double outlier_fraction = 0.0;   // keypoints replaced uniformly inside the bbox
  double dropout_fraction = 0.0;   // keypoints removed (empty heatmap channel)
  double bbox_jitter = 0.0;        // px, Gaussian on bbox origin and size
  double min_peak = 0.1;           // decoded peaks below this are discarded
  double sigma = kDefaultSigma;    // heatmap Gaussian
  std::uint64_t seed = 0;
};

inline void validate(const NoiseConfig& n) {
  auto frac = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!frac(n.outlier_fraction) || !frac(n.dropout_fraction))
    throw Error(ErrorKind::InvalidArgument, "noise fractions must lie in [0, 1]");
  if (!(n.pixel_noise_sigma >= 0.0) || !(n.bbox_jitter >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "noise sigmas must be non-negative");
  if (!(n.sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "heatmap sigma must be positive");
}

struct SceneSample {
  Pose gt;
  RoiTransform roi;
  std::vector<Vec2> keypoints_2d;  // original image pixels
};

struct Scene {
  SceneConfig config;
  TriangleMesh model;
  PointCloud metric_points;
  double diameter = 0.0;
  KeypointSet keypoints;
  std::vector<SceneSample> samples;
};

/// Uniform rotation from three uniforms (Shoemake's quaternion construction).
inline Mat3 random_rotation(Rng& rng) {
  const double u1 = rng.uniform01(), u2 = rng.uniform01(), u3 = rng.uniform01();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
  const Eigen::Quaterniond q(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
  return q.normalized().toRotationMatrix();
}

inline RoiTransform tight_roi(const std::vector<Vec2>& pts, double padding) {
  Vec2 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 extent = (hi - lo).cwiseMax(1.0);
  return RoiTransform::from_bbox(lo - padding * extent, extent * (1.0 + 2.0 * padding));
}

namespace detail {
inline constexpr std::uint64_t kPoseStream = 0x706f7365;   // "pose"
inline constexpr std::uint64_t kNoiseStream = 0x6e6f6973;  // "nois"
}  // namespace detail

inline Scene generate_scene(TriangleMesh model, const SceneConfig& cfg) {
  validate(model.vertices);
  validate(cfg.intrinsics);
  if (!(cfg.z_min_mm > 0.0) || cfg.z_max_mm < cfg.z_min_mm)
    throw Error(ErrorKind::InvalidArgument, "depth range must be positive and ordered");

  Scene scene;
  scene.config = cfg;
  scene.model = std::move(model);
  scene.diameter = diameter(scene.model.vertices);
  scene.metric_points = metric_points(scene.model.vertices);
  SelectionOptions sel;
  sel.strategy = cfg.strategy;
  sel.k = cfg.n_keypoints;
  sel.densify_seed = cfg.seed;
  scene.keypoints = select_keypoints(scene.model, sel, cfg.object_id);

  const double radius = [&] {
    double r = 0.0;
    for (const auto& p : scene.model.vertices.points) r = std::max(r, p.norm());
    return r;
  }();
  if (radius >= cfg.z_min_mm)
    throw Error(ErrorKind::InvalidArgument, "model does not fit in front of the camera at z_min");

  scene.samples.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    Rng rng(mix_seed(cfg.seed ^ detail::kPoseStream, i));
    SceneSample s;
    s.gt.rotation = random_rotation(rng);
    s.gt.translation = Vec3(rng.uniform(-cfg.xy_range_mm, cfg.xy_range_mm),
                            rng.uniform(-cfg.xy_range_mm, cfg.xy_range_mm),
                            rng.uniform(cfg.z_min_mm, cfg.z_max_mm));
    s.keypoints_2d.reserve(scene.keypoints.points.size());
    for (const auto& kp : scene.keypoints.points)
      s.keypoints_2d.push_back(project(cfg.intrinsics, transform_point(s.gt, kp)));
    s.roi = tight_roi(s.keypoints_2d, cfg.bbox_padding);
    scene.samples.push_back(std::move(s));
  }
  return scene;
}

inline Scene generate_scene(const SceneConfig& cfg) { return generate_scene(load_ply(cfg.model_path), cfg); }

enum class SampleStatus { Ok, TooFewKeypoints, NoConsensus };

inline const char* to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::Ok: return "ok";
    case SampleStatus::TooFewKeypoints: return "too_few_keypoints";
    case SampleStatus::NoConsensus: return "no_consensus";
  }
  return "unknown";
}

struct SampleResult {
  std::size_t index = 0;
  SampleStatus status = SampleStatus::Ok;
  std::optional<Pose> pred;
  EvalRecord record;
  std::size_t n_keypoints_used = 0;
  std::size_t n_inliers = 0;
  double reproj_err_px = std::numeric_limits<double>::quiet_NaN();
};

struct PipelineResult {
  EvalSummary summary;
  std::vector<SampleResult> samples;
  std::size_t correct = 0;
};

/// Observed 2D keypoints for one sample after noise, outliers and dropout.
/// Dropped keypoints are returned as NaN.
inline std::vector<Vec2> corrupt_keypoints(const SceneSample& sample, const RoiTransform& roi,
                                           const NoiseConfig& noise, Rng& rng) {
  std::vector<Vec2> obs = sample.keypoints_2d;
  const std::size_t k = obs.size();
  if (noise.pixel_noise_sigma > 0.0)
    for (auto& p : obs) p += Vec2(rng.normal(0.0, noise.pixel_noise_sigma), rng.normal(0.0, noise.pixel_noise_sigma));
  const auto n_out = static_cast<std::size_t>(std::llround(noise.outlier_fraction * static_cast<double>(k)));
  for (auto i : rng.sample_without_replacement(k, n_out))
    obs[i] = roi.bbox_origin + Vec2(rng.uniform01() * roi.bbox_size.x(), rng.uniform01() * roi.bbox_size.y());
  const auto n_drop = static_cast<std::size_t>(std::llround(noise.dropout_fraction * static_cast<double>(k)));
  for (auto i : rng.sample_without_replacement(k, n_drop))
    obs[i] = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  return obs;
}

namespace detail {

/// Plain-loop ADD / ADD-S used by the bookkeeping pass.
inline double recount_distance(const Pose& gt, const Pose& pred, const PointCloud& pts, bool symmetric) {
  double sum = 0.0;
  for (const auto& x : pts.points) {
    const Vec3 a = gt.rotation * x + gt.translation;
    if (!symmetric) {
      const Vec3 b = pred.rotation * x + pred.translation;
      sum += (a - b).norm();
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : pts.points) best = std::min(best, (a - (pred.rotation * y + pred.translation)).norm());
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

}  // namespace detail

/// Runs corrupt -> render -> decode -> PnP-RANSAC -> ADD for each sample.
/// Per-sample random streams are derived from the seeds and the sample index.
inline PipelineResult run_pipeline(const Scene& scene, const NoiseConfig& noise,
                                   const RansacConfig& ransac) {
  validate(noise);
  validate(ransac);
  const auto& cfg = scene.config;
  PipelineResult out;
  out.samples.reserve(scene.samples.size());

  for (std::size_t i = 0; i < scene.samples.size(); ++i) {
    const SceneSample& sample = scene.samples[i];
    Rng rng(mix_seed(noise.seed ^ detail::kNoiseStream, i));

    RoiTransform roi = sample.roi;
    if (noise.bbox_jitter > 0.0) {
      roi.bbox_origin += Vec2(rng.normal(0.0, noise.bbox_jitter), rng.normal(0.0, noise.bbox_jitter));
      roi.bbox_size += Vec2(rng.normal(0.0, noise.bbox_jitter), rng.normal(0.0, noise.bbox_jitter));
      roi.bbox_size = roi.bbox_size.cwiseMax(1.0);
    }
    const auto observed = corrupt_keypoints(sample, roi, noise, rng);

    std::vector<Vec2> hm(observed.size());
    for (std::size_t c = 0; c < observed.size(); ++c) hm[c] = original_to_heatmap(roi, observed[c]);
    const HeatmapStack stack = render(hm, GaussianParams{noise.sigma},
                                      static_cast<std::size_t>(roi.heatmap_size.y()),
                                      static_cast<std::size_t>(roi.heatmap_size.x()));
    const auto decoded = decode(stack);

    CorrespondenceSet corr;
    for (std::size_t c = 0; c < decoded.size(); ++c) {
      if (decoded[c].peak < noise.min_peak || decoded[c].peak <= 0.0) continue;
      corr.points_3d.push_back(scene.keypoints.points[c]);
      corr.points_2d.push_back(heatmap_to_original(roi, decoded[c].position));
    }

    SampleResult r;
    r.index = i;
    r.n_keypoints_used = corr.size();
    if (corr.size() < kMinimalSample) {
      r.status = SampleStatus::TooFewKeypoints;
    } else {
      RansacConfig rc = ransac;
      rc.seed = mix_seed(ransac.seed, i);
      try {
        const PoseEstimate est = solve_pnp_ransac(corr, cfg.intrinsics, rc);
        r.pred = est.pose;
        r.n_inliers = est.inlier_count();
        r.reproj_err_px = est.mean_reproj_error;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoConsensus) throw;
        r.status = SampleStatus::NoConsensus;
      }
    }
    r.record = score_pose(cfg.object_id, sample.gt, r.pred, scene.metric_points, scene.diameter,
                          cfg.symmetric);
    out.correct += r.record.correct ? 1 : 0;
    out.samples.push_back(std::move(r));
  }

  // Second bookkeeping pass: recompute each verdict from the stored poses.
  std::size_t recount = 0;
  for (const auto& r : out.samples) {
    bool ok = false;
    if (r.pred) {
      const double d = detail::recount_distance(scene.samples[r.index].gt, *r.pred,
                                                scene.metric_points, cfg.symmetric);
      ok = d < kDefaultDiameterFraction * scene.diameter;
    }
    recount += ok ? 1 : 0;
  }
  if (recount != out.correct)
    throw Error(ErrorKind::InvalidArgument, "correctness bookkeeping mismatch: " +
                                                std::to_string(out.correct) + " vs " + std::to_string(recount));

  std::vector<EvalRecord> records;
  records.reserve(out.samples.size());
  for (const auto& r : out.samples) records.push_back(r.record);
  out.summary = summarize(records);
  return out;
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Per-sample CSV: index,add_mm,threshold_mm,correct,n_inliers,reproj_err_px
inline std::string format_csv(const PipelineResult& res) {
  std::string out = "index,add_mm,threshold_mm,correct,n_inliers,reproj_err_px\n";
  for (const auto& r : res.samples) {
    out += std::to_string(r.index) + "," + format_number(r.record.add_value) + "," +
           format_number(r.record.threshold) + "," + (r.record.correct ? "1" : "0") + "," +
           std::to_string(r.n_inliers) + "," + format_number(r.reproj_err_px) + "\n";
  }
  return out;
}

/// Pose error a one-cell decode offset causes laterally, in mm: the size of a
/// heatmap cell in image pixels, back-projected at the sample's depth.
inline double quantization_bound_mm(const SceneSample& s, const CameraIntrinsics& intr) {
  const Vec2 cell = s.roi.bbox_size.cwiseQuotient(s.roi.heatmap_size);
  const double z = s.gt.translation.z();
  return std::max(cell.x() * z / intr.fx, cell.y() * z / intr.fy);
}

}  // namespace kpose::sim
