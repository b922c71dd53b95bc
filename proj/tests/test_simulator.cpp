#include <gtest/gtest.h>

#include <algorithm>
#include <iostream>

#include "kpose/shapes.hpp"
#include "kpose/simulator.hpp"
#include "test_util.hpp"

using namespace kpose;

namespace {

// 100 x 80 x 60 mm box, diameter ~141 mm.
const TriangleMesh& box_model() {
  static const TriangleMesh m = shapes::box(100, 80, 60, 8);
  return m;
}

sim::Scene make_scene(std::size_t n, std::uint64_t seed = 1,
                      SamplingStrategy strategy = SamplingStrategy::FPS,
                      const TriangleMesh& model = box_model()) {
  sim::SceneConfig cfg;
  cfg.object_id = "box";
  cfg.n_samples = n;
  cfg.seed = seed;
  cfg.strategy = strategy;
  return sim::generate_scene(model, cfg);
}

sim::NoiseConfig noise_with(double sigma, std::uint64_t seed = 1) {
  sim::NoiseConfig n;
  n.pixel_noise_sigma = sigma;
  n.seed = seed;
  return n;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Scene, DeterministicForSeed) {
  const auto a = make_scene(20, 9), b = make_scene(20, 9), c = make_scene(20, 10);
  ASSERT_EQ(a.samples.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.samples[i].gt.rotation, b.samples[i].gt.rotation);
    EXPECT_EQ(a.samples[i].keypoints_2d, b.samples[i].keypoints_2d);
  }
  EXPECT_NE(a.samples[0].gt.translation, c.samples[0].gt.translation);
}

TEST(Scene, PosesInsideConfiguredRanges) {
  const auto s = make_scene(200);
  for (const auto& smp : s.samples) {
    EXPECT_TRUE(is_rotation(smp.gt.rotation));
    EXPECT_LE(std::abs(smp.gt.translation.x()), 100.0);
    EXPECT_LE(std::abs(smp.gt.translation.y()), 100.0);
    EXPECT_GE(smp.gt.translation.z(), 400.0);
    EXPECT_LE(smp.gt.translation.z(), 1500.0);
  }
}

TEST(Scene, KeypointsInsideBoxAndHeatmap) {
  const auto s = make_scene(100);
  for (const auto& smp : s.samples) {
    for (const auto& p : smp.keypoints_2d) {
      EXPECT_GE(p.x(), smp.roi.bbox_origin.x());
      EXPECT_GE(p.y(), smp.roi.bbox_origin.y());
      EXPECT_LE(p.x(), smp.roi.bbox_origin.x() + smp.roi.bbox_size.x());
      EXPECT_LE(p.y(), smp.roi.bbox_origin.y() + smp.roi.bbox_size.y());
      const Vec2 h = original_to_heatmap(smp.roi, p);
      EXPECT_GE(h.minCoeff(), 0.0);
      EXPECT_LE(h.maxCoeff(), 64.0);
      EXPECT_LT((heatmap_to_original(smp.roi, h) - p).norm(), 1e-9);
    }
  }
}

TEST(Scene, ModelMustFitInFrontOfCamera) {
  sim::SceneConfig cfg;
  cfg.z_min_mm = 50.0;
  cfg.n_samples = 1;
  EXPECT_THROW(sim::generate_scene(box_model(), cfg), Error);
}

TEST(Pipeline, NoiselessIsAlwaysCorrect) {
  const auto scene = make_scene(100);
  const auto res = sim::run_pipeline(scene, noise_with(0.0), RansacConfig{});
  EXPECT_EQ(res.correct, 100u);
  EXPECT_EQ(res.summary.mean_accuracy, 1.0);
  for (const auto& r : res.samples) EXPECT_EQ(r.status, sim::SampleStatus::Ok);
}

TEST(Pipeline, DeterministicOutput) {
  const auto scene = make_scene(30);
  sim::NoiseConfig n = noise_with(1.5, 4);
  n.outlier_fraction = 0.2;
  n.dropout_fraction = 0.1;
  n.bbox_jitter = 2.0;
  const auto a = sim::run_pipeline(scene, n, RansacConfig{});
  const auto b = sim::run_pipeline(scene, n, RansacConfig{});
  EXPECT_EQ(sim::format_csv(a), sim::format_csv(b));
}

TEST(Pipeline, AccuracyNonIncreasingInPixelNoise) {
  const auto scene = make_scene(100);
  double prev = 2.0;
  for (double sigma : {0.0, 1.0, 3.0}) {
    const double acc = sim::run_pipeline(scene, noise_with(sigma), RansacConfig{}).summary.mean_accuracy;
    EXPECT_LE(acc, prev) << "sigma " << sigma;
    prev = acc;
  }
}

TEST(Pipeline, AllOutliersNeverCorrect) {
  const auto scene = make_scene(50);
  sim::NoiseConfig n = noise_with(0.0);
  n.outlier_fraction = 1.0;
  const auto res = sim::run_pipeline(scene, n, RansacConfig{});
  EXPECT_EQ(res.correct, 0u);
  const auto no_consensus = std::count_if(res.samples.begin(), res.samples.end(), [](const auto& r) {
    return r.status == sim::SampleStatus::NoConsensus;
  });
  EXPECT_GE(no_consensus, 45);
}

TEST(Pipeline, HeavyDropoutLeavesTooFewKeypoints) {
  const auto scene = make_scene(10);
  sim::NoiseConfig n = noise_with(0.0);
  n.dropout_fraction = 0.9;
  const auto res = sim::run_pipeline(scene, n, RansacConfig{});
  for (const auto& r : res.samples) {
    EXPECT_EQ(r.status, sim::SampleStatus::TooFewKeypoints);
    EXPECT_EQ(r.n_keypoints_used, 5u);
    EXPECT_FALSE(r.record.correct);
  }
}

TEST(Pipeline, CorruptionCountsAreExact) {
  const auto scene = make_scene(1);
  sim::NoiseConfig n;
  n.outlier_fraction = 0.2;
  n.dropout_fraction = 0.3;
  Rng rng(3);
  const auto obs = sim::corrupt_keypoints(scene.samples[0], scene.samples[0].roi, n, rng);
  const auto dropped = std::count_if(obs.begin(), obs.end(), [](const Vec2& p) { return !p.allFinite(); });
  EXPECT_EQ(dropped, 15);
}

TEST(Pipeline, NoiselessErrorBelowQuantizationBoundOnLargeModel) {
  // The decode snaps to whole heatmap cells, so the noiseless error is set by
  // the cell size at the sample depth. On small objects a fixed ~1.7 mm PnP
  // floor dominates instead, so this is checked on a 300 mm class object.
  const TriangleMesh big = shapes::box(300, 200, 150, 8);
  const auto scene = make_scene(100, 1, SamplingStrategy::FPS, big);
  const auto res = sim::run_pipeline(scene, noise_with(0.0), RansacConfig{});
  std::vector<double> add_mm, bound_mm;
  for (std::size_t i = 0; i < res.samples.size(); ++i) {
    add_mm.push_back(res.samples[i].record.add_value);
    bound_mm.push_back(sim::quantization_bound_mm(scene.samples[i], scene.config.intrinsics));
  }
  EXPECT_LT(median(add_mm), 0.5 * median(bound_mm));
}

TEST(Pipeline, FpsVersusCpsTrend) {
  // Expected trend only: FPS should hold up at least as well as CPS under
  // heavy dropout on an elongated, mostly flat model. Warns instead of failing.
  const TriangleMesh bar = shapes::box(200, 40, 30, 8);
  std::size_t fps_correct = 0, cps_correct = 0, total = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    sim::NoiseConfig n = noise_with(1.0, seed);
    n.dropout_fraction = 0.3;
    fps_correct += sim::run_pipeline(make_scene(100, seed, SamplingStrategy::FPS, bar), n, RansacConfig{}).correct;
    cps_correct += sim::run_pipeline(make_scene(100, seed, SamplingStrategy::CPS, bar), n, RansacConfig{}).correct;
    total += 100;
  }
  std::cout << "[ info ] fps " << fps_correct << "/" << total << ", cps " << cps_correct << "/" << total << "\n";
  if (fps_correct < cps_correct) std::cout << "[ warn ] cps above fps on this fixture\n";
  SUCCEED();
}

TEST(Csv, HeaderAndRows) {
  const auto scene = make_scene(3);
  const std::string csv = sim::format_csv(sim::run_pipeline(scene, noise_with(0.0), RansacConfig{}));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,add_mm,threshold_mm,correct,n_inliers,reproj_err_px");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(sim::format_number(0.1), "0.1");
}
