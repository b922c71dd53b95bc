#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"
#include "kpose/random.hpp"

namespace kpose {

/// 3D model points paired with observed image points (original image pixels).
struct CorrespondenceSet {
  std::vector<Vec3> points_3d;
  std::vector<Vec2> points_2d;
  std::vector<double> weights;  // empty, or one confidence in [0, 1] per pair

  std::size_t size() const { return points_3d.size(); }

  CorrespondenceSet subset(const std::vector<std::size_t>& idx, bool keep_weights) const {
    CorrespondenceSet out;
    out.points_3d.reserve(idx.size());
    out.points_2d.reserve(idx.size());
    for (auto i : idx) {
      out.points_3d.push_back(points_3d[i]);
      out.points_2d.push_back(points_2d[i]);
      if (keep_weights && !weights.empty()) out.weights.push_back(weights[i]);
    }
    return out;
  }
};

inline void validate(const CorrespondenceSet& corr) {
  if (corr.points_3d.size() != corr.points_2d.size())
    throw Error(ErrorKind::InvalidArgument, "3D and 2D point lists differ in length");
  if (!corr.weights.empty() && corr.weights.size() != corr.points_3d.size())
    throw Error(ErrorKind::InvalidArgument, "weight list length does not match correspondences");
  for (double w : corr.weights)
    if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorKind::InvalidArgument, "weights must lie in [0, 1]");
}

inline constexpr std::size_t kMinimalSample = 6;

struct LmOptions {
  int max_iterations = 100;
  double relative_decrease = 1e-10;
  double initial_damping = 1e-3;
};

struct PnpSolution {
  Pose pose;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;  // sum of squared (weighted) reprojection residuals, px^2
};

/// Per-correspondence pixel error; +inf where the point lands behind the camera.
inline std::vector<double> reprojection_errors(const Pose& pose, const CorrespondenceSet& corr,
                                               const CameraIntrinsics& intr) {
  std::vector<double> err(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 pc = transform_point(pose, corr.points_3d[i]);
    if (!(pc.z() > 0.0)) {
      err[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    err[i] = (project(intr, pc) - corr.points_2d[i]).norm();
  }
  return err;
}

namespace pnp_detail {

/// Linear estimate of [R|t] from >= 6 correspondences. The 3D points are
/// centred and scaled before building the system; the rotation block is
/// projected onto SO(3) afterwards.
inline Pose dlt(const CorrespondenceSet& corr, const CameraIntrinsics& intr) {
  const std::size_t n = corr.size();
  Vec3 center = Vec3::Zero();
  for (const auto& p : corr.points_3d) center += p;
  center /= static_cast<double>(n);
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : corr.points_3d) scatter += (p - center) * (p - center).transpose();
  const double rms = std::sqrt(scatter.trace() / static_cast<double>(n));
  if (!(rms > 0.0)) throw Error(ErrorKind::DegenerateConfiguration, "all 3D points coincide");

  const Eigen::SelfAdjointEigenSolver<Mat3> shape(scatter, Eigen::EigenvaluesOnly);
  const Vec3 ev = shape.eigenvalues();
  if (ev[1] <= 1e-12 * ev[2])
    throw Error(ErrorKind::DegenerateConfiguration, "3D points are collinear");
  if (ev[0] <= 1e-12 * ev[2])
    throw Error(ErrorKind::DegenerateConfiguration, "3D points are coplanar");

  const double scale = rms / std::sqrt(3.0);
  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 xn = (corr.points_3d[i] - center) / scale;
    const Eigen::Vector4d xh(xn.x(), xn.y(), xn.z(), 1.0);
    const double u = (corr.points_2d[i].x() - intr.cx) / intr.fx;
    const double v = (corr.points_2d[i].y() - intr.cy) / intr.fy;
    const auto r0 = static_cast<Eigen::Index>(2 * i);
    a.row(r0) << xh.transpose(), Eigen::RowVector4d::Zero(), -u * xh.transpose();
    a.row(r0 + 1) << Eigen::RowVector4d::Zero(), xh.transpose(), -v * xh.transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[10] <= 1e-12 * sv[0])
    throw Error(ErrorKind::DegenerateConfiguration, "DLT system is rank deficient");

  Eigen::Matrix<double, 3, 4> p;
  const Eigen::VectorXd h = svd.matrixV().col(11);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) p(r, c) = h[4 * r + c];
  // The null vector's sign is arbitrary; the point-set centre (the normalized
  // origin) must lie in front of the camera.
  if (p(2, 3) < 0.0) p = -p;

  const Eigen::JacobiSVD<Mat3> rs(p.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double lambda = rs.singularValues().mean();
  if (!(lambda > 0.0)) throw Error(ErrorKind::DegenerateConfiguration, "DLT produced a null rotation block");

  Pose pose;
  pose.rotation = nearest_rotation(p.leftCols<3>());
  pose.translation = p.col(3) * (scale / lambda) - pose.rotation * center;
  return pose;
}

inline double cost_of(const Pose& pose, const CorrespondenceSet& corr,
                      const CameraIntrinsics& intr) {
  double cost = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 pc = transform_point(pose, corr.points_3d[i]);
    if (!(pc.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const double w = corr.weights.empty() ? 1.0 : corr.weights[i];
    cost += w * w * (project(intr, pc) - corr.points_2d[i]).squaredNorm();
  }
  return cost;
}

/// Levenberg-Marquardt on a left-multiplied axis-angle increment and an
/// additive translation increment.
inline PnpSolution refine(const Pose& init, const CorrespondenceSet& corr,
                          const CameraIntrinsics& intr, const LmOptions& opt) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  PnpSolution sol;
  sol.pose = init;
  sol.cost = cost_of(init, corr, intr);
  if (!std::isfinite(sol.cost))
    throw Error(ErrorKind::DegenerateConfiguration, "initial pose puts points behind the camera");

  double mu = opt.initial_damping;
  for (sol.iterations = 0; sol.iterations < opt.max_iterations; ++sol.iterations) {
    if (sol.cost == 0.0) {
      sol.converged = true;
      return sol;
    }
    Mat6 jtj = Mat6::Zero();
    Vec6 jtr = Vec6::Zero();
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Vec3 rx = sol.pose.rotation * corr.points_3d[i];
      const Vec3 pc = rx + sol.pose.translation;
      const double w = corr.weights.empty() ? 1.0 : corr.weights[i];
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << intr.fx * iz, 0.0, -intr.fx * pc.x() * iz * iz,
               0.0, intr.fy * iz, -intr.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dpc;
      dpc << -skew(rx), Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = w * dproj * dpc;
      const Vec2 r = w * (project(intr, pc) - corr.points_2d[i]);
      jtj.noalias() += j.transpose() * j;
      jtr.noalias() += j.transpose() * r;
    }

    Mat6 damped = jtj;
    for (int d = 0; d < 6; ++d) damped(d, d) += mu * std::max(jtj(d, d), 1e-12);
    const Vec6 delta = damped.ldlt().solve(-jtr);
    if (!delta.allFinite()) break;

    Pose cand;
    cand.rotation = axis_angle_to_matrix(delta.head<3>()) * sol.pose.rotation;
    cand.translation = sol.pose.translation + delta.tail<3>();
    const double cand_cost = cost_of(cand, corr, intr);

    if (cand_cost < sol.cost) {
      const double decrease = (sol.cost - cand_cost) / sol.cost;
      sol.pose = cand;
      sol.cost = cand_cost;
      mu *= 0.1;
      if (decrease < opt.relative_decrease) {
        sol.converged = true;
        ++sol.iterations;
        return sol;
      }
    } else {
      mu *= 10.0;
      // No damping level yields a decrease: already at the minimum to working precision.
      if (mu > 1e16) {
        sol.converged = true;
        ++sol.iterations;
        return sol;
      }
    }
  }
  return sol;
}

}  // namespace pnp_detail

/// Pose from 2D-3D correspondences: DLT initialization, then LM on the full
/// reprojection error. Weights, when present, scale each residual.
/// A solution that hits the iteration cap is returned with converged == false.
inline PnpSolution solve_pnp(const CorrespondenceSet& corr, const CameraIntrinsics& intr,
                             const LmOptions& opt = {}) {
  validate(corr);
  validate(intr);
  if (corr.size() < kMinimalSample)
    throw Error(ErrorKind::InsufficientPoints,
                "PnP needs at least 6 correspondences, got " + std::to_string(corr.size()));
  const Pose init = pnp_detail::dlt(corr, intr);
  return pnp_detail::refine(init, corr, intr, opt);
}

struct RansacConfig {
  int max_iterations = 300;
  double reproj_threshold = 3.0;
  std::size_t min_inliers = 6;
  double confidence = 0.999;
  std::uint64_t seed = 0;
};

inline void validate(const RansacConfig& cfg) {
  if (cfg.max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  if (!(cfg.reproj_threshold > 0.0))
    throw Error(ErrorKind::InvalidArgument, "reprojection threshold must be positive");
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0))
    throw Error(ErrorKind::InvalidArgument, "confidence must lie in (0, 1)");
}

struct PoseEstimate {
  Pose pose;
  std::vector<bool> inlier_mask;
  double mean_reproj_error = 0.0;  // px, over inliers
  int iterations = 0;              // hypotheses drawn
  bool refit_converged = false;

  std::size_t inlier_count() const {
    return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
  }
};

/// Hypotheses needed so that an all-inlier sample is drawn with `confidence`.
inline int adaptive_iterations(double inlier_ratio, double confidence, int cap) {
  if (inlier_ratio >= 1.0) return 1;
  const double all_in = std::pow(inlier_ratio, static_cast<double>(kMinimalSample));
  if (all_in <= 0.0) return cap;
  const double need = std::log(1.0 - confidence) / std::log(1.0 - all_in);
  if (!std::isfinite(need) || need >= cap) return cap;
  return std::max(1, static_cast<int>(std::ceil(need)));
}

/// RANSAC over 6-point samples. Each hypothesis is scored by the count of
/// correspondences with reprojection error below the threshold; the best
/// consensus set is refit with solve_pnp (using weights, if any). Sampling
/// draws from a seeded Rng, so identical inputs give identical output.
inline PoseEstimate solve_pnp_ransac(const CorrespondenceSet& corr, const CameraIntrinsics& intr,
                                     const RansacConfig& cfg = {}) {
  validate(corr);
  validate(intr);
  validate(cfg);
  const std::size_t n = corr.size();
  if (n < kMinimalSample)
    throw Error(ErrorKind::InsufficientPoints,
                "RANSAC needs at least 6 correspondences, got " + std::to_string(n));

  auto mask_of = [&](const Pose& pose, std::size_t& count) {
    const auto err = reprojection_errors(pose, corr, intr);
    std::vector<bool> mask(n);
    count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = err[i] < cfg.reproj_threshold;
      count += mask[i] ? 1 : 0;
    }
    return mask;
  };

  Rng rng(cfg.seed);
  std::size_t best_count = 0;
  std::vector<bool> best_mask;
  Pose best_pose;
  int needed = cfg.max_iterations;
  int it = 0;
  for (; it < needed; ++it) {
    const auto sample = rng.sample_without_replacement(n, kMinimalSample);
    PnpSolution hyp;
    try {
      hyp = solve_pnp(corr.subset(sample, false), intr);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DegenerateConfiguration) continue;
      throw;
    }
    std::size_t count = 0;
    auto mask = mask_of(hyp.pose, count);
    if (count > best_count) {
      best_count = count;
      best_mask = std::move(mask);
      best_pose = hyp.pose;
      needed = std::min(needed, adaptive_iterations(static_cast<double>(count) / static_cast<double>(n),
                                                    cfg.confidence, cfg.max_iterations));
    }
  }

  const std::size_t required = std::max(cfg.min_inliers, kMinimalSample);
  if (best_count < required)
    throw Error(ErrorKind::NoConsensus, "best hypothesis has " + std::to_string(best_count) +
                                            " inliers, need " + std::to_string(required));

  PoseEstimate est;
  est.iterations = it;
  est.pose = best_pose;
  est.inlier_mask = best_mask;

  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < n; ++i)
    if (best_mask[i]) inliers.push_back(i);
  try {
    const PnpSolution refit = solve_pnp(corr.subset(inliers, true), intr);
    std::size_t refit_count = 0;
    auto refit_mask = mask_of(refit.pose, refit_count);
    // Keep the hypothesis if the refit would shrink the consensus set.
    if (refit_count >= best_count) {
      est.pose = refit.pose;
      est.inlier_mask = std::move(refit_mask);
      est.refit_converged = refit.converged;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateConfiguration) throw;
  }

  const auto err = reprojection_errors(est.pose, corr, intr);
  double sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (est.inlier_mask[i]) {
      sum += err[i];
      ++cnt;
    }
  est.mean_reproj_error = cnt ? sum / static_cast<double>(cnt) : 0.0;
  return est;
}

}  // namespace kpose
