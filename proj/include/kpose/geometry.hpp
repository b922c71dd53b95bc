#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "kpose/error.hpp"

namespace kpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform taking model-frame points (mm) into the camera frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Pose inverse() const {
    Pose out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  /// (*this) after `rhs`: x -> R (R' x + t') + t.
  Pose compose(const Pose& rhs) const {
    Pose out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }
};

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho < tol && std::abs(r.determinant() - 1.0) < tol;
}

inline void validate(const Pose& pose) {
  if (!pose.rotation.allFinite() || !pose.translation.allFinite())
    throw Error(ErrorKind::InvalidArgument, "pose has non-finite entries");
  if (!is_rotation(pose.rotation))
    throw Error(ErrorKind::InvalidArgument, "pose rotation is not orthonormal");
}

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

inline void validate(const CameraIntrinsics& intr) {
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
    throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  if (!std::isfinite(intr.cx) || !std::isfinite(intr.cy))
    throw Error(ErrorKind::InvalidArgument, "principal point must be finite");
}

/// Affine chain between the original image, the resized detector crop and
/// the heatmap grid. Pixel (0,0) is the center of the top-left pixel.
struct RoiTransform {
  Vec2 bbox_origin = Vec2::Zero();
  Vec2 bbox_size = Vec2(256.0, 256.0);
  Vec2 crop_size = Vec2(256.0, 256.0);
  Vec2 heatmap_size = Vec2(64.0, 64.0);

  static RoiTransform from_bbox(const Vec2& origin, const Vec2& size) {
    RoiTransform roi;
    roi.bbox_origin = origin;
    roi.bbox_size = size;
    return roi;
  }
};

inline void validate(const RoiTransform& roi) {
  if (!(roi.bbox_size.x() > 0.0) || !(roi.bbox_size.y() > 0.0))
    throw Error(ErrorKind::InvalidArgument, "bbox size must be positive");
  if (!(roi.crop_size.minCoeff() > 0.0) || !(roi.heatmap_size.minCoeff() > 0.0))
    throw Error(ErrorKind::InvalidArgument, "crop and heatmap sizes must be positive");
  if (!roi.bbox_origin.allFinite())
    throw Error(ErrorKind::InvalidArgument, "bbox origin must be finite");
}

inline Vec3 transform_point(const Pose& pose, const Vec3& p) {
  return pose.rotation * p + pose.translation;
}

inline Vec2 project(const CameraIntrinsics& intr, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0))
    throw Error(ErrorKind::NonPositiveDepth, "point at z=" + std::to_string(p_cam.z()) +
                                                 " is not in front of the camera");
  return {intr.fx * p_cam.x() / p_cam.z() + intr.cx,
          intr.fy * p_cam.y() / p_cam.z() + intr.cy};
}

inline Vec2 heatmap_to_original(const RoiTransform& roi, const Vec2& p_hm) {
  const Vec2 p_crop = p_hm.cwiseProduct(roi.crop_size.cwiseQuotient(roi.heatmap_size));
  return roi.bbox_origin + p_crop.cwiseProduct(roi.bbox_size.cwiseQuotient(roi.crop_size));
}

inline Vec2 original_to_heatmap(const RoiTransform& roi, const Vec2& p_img) {
  const Vec2 p_crop =
      (p_img - roi.bbox_origin).cwiseProduct(roi.crop_size.cwiseQuotient(roi.bbox_size));
  return p_crop.cwiseProduct(roi.heatmap_size.cwiseQuotient(roi.crop_size));
}

// Rotation helpers. The solver works on axis-angle increments; poses keep matrices.

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

inline Mat3 axis_angle_to_matrix(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    // First-order expansion, re-projected so the result stays orthonormal.
    Mat3 r = Mat3::Identity() + skew(omega);
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
  }
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

inline Vec3 matrix_to_axis_angle(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

inline Mat3 rot_x(double rad) { return Eigen::AngleAxisd(rad, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double rad) { return Eigen::AngleAxisd(rad, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double rad) { return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix(); }

/// Closest rotation in the Frobenius sense; flips the weakest axis when the
/// input has negative determinant.
inline Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Geodesic angle (rad) between two rotations.
inline double rotation_error(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
  // acos loses precision near zero; use the antisymmetric part there.
  if (c > 0.999) {
    const Mat3 d = a.transpose() * b;
    const Vec3 v(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
    return std::asin(std::min(1.0, 0.5 * v.norm()));
  }
  return std::acos(c);
}

}  // namespace kpose
