#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kpose/geometry.hpp"
#include "kpose/random.hpp"
#include "test_util.hpp"

using namespace kpose;

TEST(TransformPoint, IdentityAndTranslation) {
  EXPECT_EQ(transform_point(Pose::identity(), Vec3(1, 2, 3)), Vec3(1, 2, 3));
  Pose p;
  p.translation = Vec3(0, 0, 10);
  EXPECT_EQ(transform_point(p, Vec3::Zero()), Vec3(0, 0, 10));
}

TEST(TransformPoint, QuarterTurnAboutZ) {
  Pose p;
  p.rotation = rot_z(std::numbers::pi / 2);
  const Vec3 q = transform_point(p, Vec3(1, 0, 0));
  EXPECT_NEAR(q.x(), 0.0, 1e-15);
  EXPECT_NEAR(q.y(), 1.0, 1e-15);
  EXPECT_NEAR(q.z(), 0.0, 1e-15);
}

TEST(TransformPoint, PreservesDistances) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose pose = testutil::random_pose(rng);
    const Vec3 a(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100));
    const Vec3 b(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100));
    EXPECT_NEAR((transform_point(pose, a) - transform_point(pose, b)).norm(), (a - b).norm(), 1e-9);
  }
}

TEST(Project, FormulaAndOpticalAxis) {
  const CameraIntrinsics k{500, 500, 128, 128};
  EXPECT_EQ(project(k, Vec3(0, 0, 500)), Vec2(128, 128));
  EXPECT_EQ(project(k, Vec3(100, 0, 500)), Vec2(228, 128));
}

TEST(Project, BehindCameraThrows) {
  const CameraIntrinsics k{500, 500, 128, 128};
  try {
    project(k, Vec3(0, 0, -1));
    FAIL() << "expected NonPositiveDepth";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveDepth);
  }
  EXPECT_THROW(project(k, Vec3(1, 1, 0)), Error);
}

TEST(Project, DepthScaleInvariant) {
  Rng rng(5);
  const CameraIntrinsics k{572.4, 573.6, 325.3, 242.0};
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(rng.uniform(-200, 200), rng.uniform(-200, 200), rng.uniform(1, 2000));
    const double lambda = rng.uniform(0.01, 100.0);
    EXPECT_LT((project(k, p) - project(k, lambda * p)).norm(), 1e-9);
  }
}

TEST(Roi, HeatmapToOriginalExamples) {
  const auto roi = RoiTransform::from_bbox(Vec2(100, 50), Vec2(128, 64));
  EXPECT_EQ(heatmap_to_original(roi, Vec2(16, 8)), Vec2(132, 58));
  EXPECT_EQ(heatmap_to_original(roi, Vec2(0, 0)), Vec2(100, 50));

  const auto full = RoiTransform::from_bbox(Vec2(0, 0), Vec2(256, 256));
  EXPECT_EQ(heatmap_to_original(full, Vec2(32, 32)), Vec2(128, 128));
}

TEST(Roi, OriginalToHeatmapInvertsExamples) {
  const auto roi = RoiTransform::from_bbox(Vec2(100, 50), Vec2(128, 64));
  EXPECT_EQ(original_to_heatmap(roi, Vec2(132, 58)), Vec2(16, 8));
  EXPECT_EQ(original_to_heatmap(roi, Vec2(100, 50)), Vec2(0, 0));
  const auto full = RoiTransform::from_bbox(Vec2(0, 0), Vec2(256, 256));
  EXPECT_EQ(original_to_heatmap(full, Vec2(128, 128)), Vec2(32, 32));
}

TEST(Roi, RoundTripProperty) {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto roi = RoiTransform::from_bbox(Vec2(rng.uniform(-50, 600), rng.uniform(-50, 400)),
                                             Vec2(rng.uniform(1, 400), rng.uniform(1, 400)));
    const Vec2 p(rng.uniform(-500, 1500), rng.uniform(-500, 1500));
    EXPECT_LT((heatmap_to_original(roi, original_to_heatmap(roi, p)) - p).norm(), 1e-9);
  }
}

TEST(Roi, ValidationRejectsEmptyBox) {
  EXPECT_THROW(validate(RoiTransform::from_bbox(Vec2(0, 0), Vec2(0, 10))), Error);
  EXPECT_NO_THROW(validate(RoiTransform::from_bbox(Vec2(0, 0), Vec2(5, 10))));
}

TEST(Rotation, AxisAngleRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = sim::random_rotation(rng);
    EXPECT_TRUE(is_rotation(r));
    EXPECT_LT(rotation_error(axis_angle_to_matrix(matrix_to_axis_angle(r)), r), 1e-9);
  }
  EXPECT_TRUE(is_rotation(axis_angle_to_matrix(Vec3(1e-14, 0, 0))));
}

TEST(Rotation, NearestRotationRepairsNoise) {
  Rng rng(4);
  const Mat3 r = sim::random_rotation(rng);
  Mat3 noisy = r;
  noisy(0, 1) += 1e-3;
  noisy(2, 2) -= 2e-3;
  const Mat3 fixed = nearest_rotation(noisy);
  EXPECT_TRUE(is_rotation(fixed));
  EXPECT_LT(rotation_error(fixed, r), 5e-3);
}

TEST(Rotation, ErrorIsAccurateForSmallAngles) {
  EXPECT_NEAR(rotation_error(Mat3::Identity(), rot_x(1e-8)), 1e-8, 1e-15);
  EXPECT_NEAR(rotation_error(Mat3::Identity(), rot_y(2.0)), 2.0, 1e-12);
}

TEST(PoseAlgebra, InverseAndCompose) {
  Rng rng(8);
  const Pose a = testutil::random_pose(rng);
  const Pose id = a.compose(a.inverse());
  EXPECT_LT((id.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-9);
}

TEST(Validation, IntrinsicsAndPose) {
  EXPECT_THROW(validate(CameraIntrinsics{0, 1, 0, 0}), Error);
  Pose bad;
  bad.rotation(0, 0) = 2.0;
  EXPECT_THROW(validate(bad), Error);
}
