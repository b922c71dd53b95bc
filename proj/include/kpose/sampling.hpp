#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/kdtree.hpp"
#include "kpose/mesh.hpp"
#include "kpose/random.hpp"

namespace kpose {

enum class SamplingStrategy { FPS, CPS };

inline const char* to_string(SamplingStrategy s) { return s == SamplingStrategy::FPS ? "fps" : "cps"; }

inline SamplingStrategy parse_strategy(const std::string& name) {
  if (name == "fps" || name == "FPS") return SamplingStrategy::FPS;
  if (name == "cps" || name == "CPS") return SamplingStrategy::CPS;
  throw Error(ErrorKind::InvalidArgument, "unknown sampling strategy '" + name + "'");
}

inline constexpr std::size_t kDefaultKeypointCount = 50;

/// Selected model keypoints. `source_indices` index the cloud the selection
/// ran on, which for CPS on a sparse mesh is the densified surface sample.
struct KeypointSet {
  std::string object_id;
  SamplingStrategy strategy = SamplingStrategy::FPS;
  std::vector<Vec3> points;
  std::vector<std::size_t> source_indices;
};

struct CurvatureParams {
  std::size_t k_neighbors = 16;
  double epsilon = 1e-8;
};

inline void validate(const CurvatureParams& p) {
  if (p.k_neighbors < 4) throw Error(ErrorKind::InvalidArgument, "k_neighbors must be >= 4");
  if (!(p.epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be non-negative");
}

namespace detail {

inline void check_k(std::size_t k, std::size_t n) {
  if (k == 0) throw Error(ErrorKind::InvalidK, "k must be at least 1");
  if (k > n)
    throw Error(ErrorKind::InvalidK,
                "k=" + std::to_string(k) + " exceeds cloud size " + std::to_string(n));
}

inline KeypointSet make_set(const PointCloud& pc, SamplingStrategy s,
                            std::vector<std::size_t> idx) {
  KeypointSet out;
  out.strategy = s;
  out.points.reserve(idx.size());
  for (auto i : idx) out.points.push_back(pc.points[i]);
  out.source_indices = std::move(idx);
  return out;
}

}  // namespace detail

/// Greedy farthest point sampling from `start`. Each new point maximizes the
/// minimum distance to the points already chosen; ties go to the lowest index.
inline KeypointSet fps(const PointCloud& pc, std::size_t k, std::size_t start = 0) {
  detail::check_k(k, pc.size());
  if (start >= pc.size()) throw Error(ErrorKind::InvalidArgument, "start index out of range");

  const auto& pts = pc.points;
  std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::infinity());
  std::vector<char> taken(pts.size(), 0);
  std::vector<std::size_t> chosen;
  chosen.reserve(k);

  std::size_t current = start;
  for (std::size_t step = 0; step < k; ++step) {
    chosen.push_back(current);
    taken[current] = 1;
    if (step + 1 == k) break;
    std::size_t best = pts.size();
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (taken[i]) continue;
      min_d2[i] = std::min(min_d2[i], dist2(pts[i], pts[current]));
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    current = best;
  }
  return detail::make_set(pc, SamplingStrategy::FPS, std::move(chosen));
}

/// FPS with the start point drawn from a seeded generator.
inline KeypointSet fps_seeded(const PointCloud& pc, std::size_t k, std::uint64_t seed) {
  detail::check_k(k, pc.size());
  Rng rng(seed);
  return fps(pc, k, static_cast<std::size_t>(rng.below(pc.size())));
}

inline constexpr std::size_t kBruteForceNeighborLimit = 50000;

/// Local PCA curvature lambda0 / (lambda0 + lambda1 + lambda2 + eps) per point.
/// The neighbourhood is the k nearest points including the query itself.
inline std::vector<double> curvature(const PointCloud& pc, const CurvatureParams& params = {}) {
  validate(params);
  if (pc.size() <= params.k_neighbors)
    throw Error(ErrorKind::InsufficientPoints,
                "curvature needs more than k_neighbors=" + std::to_string(params.k_neighbors) +
                    " points, got " + std::to_string(pc.size()));

  const auto& pts = pc.points;
  std::optional<KdTree> tree;
  if (pts.size() > kBruteForceNeighborLimit) tree.emplace(pts);

  std::vector<double> kappa(pts.size(), 0.0);
  const double inv_k = 1.0 / static_cast<double>(params.k_neighbors);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto nbrs = tree ? tree->knn(pts[i], params.k_neighbors)
                           : knn_brute_force(pts, pts[i], params.k_neighbors);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nbrs) mean += pts[n.index];
    mean *= inv_k;
    Mat3 cov = Mat3::Zero();
    for (const auto& n : nbrs) {
      const Vec3 d = pts[n.index] - mean;
      cov.noalias() += d * d.transpose();
    }
    cov *= inv_k;
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov, Eigen::EigenvaluesOnly);
    Vec3 lambda = eig.eigenvalues().cwiseMax(0.0);  // ascending
    const double denom = lambda.sum() + params.epsilon;
    kappa[i] = denom > 0.0 ? lambda[0] / denom : 0.0;
  }
  return kappa;
}

/// score = curvature * distance to the cloud centroid.
inline std::vector<double> cps_scores(const PointCloud& pc, const CurvatureParams& params = {}) {
  const auto kappa = curvature(pc, params);
  const Vec3 center = centroid(pc);
  std::vector<double> score(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) score[i] = kappa[i] * (pc.points[i] - center).norm();
  return score;
}

/// The k highest-scoring points, ordered by score descending then index.
inline KeypointSet cps(const PointCloud& pc, std::size_t k, const CurvatureParams& params = {}) {
  detail::check_k(k, pc.size());
  const auto score = cps_scores(pc, params);
  std::vector<std::size_t> order(pc.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return score[a] > score[b] || (score[a] == score[b] && a < b);
                    });
  order.resize(k);
  return detail::make_set(pc, SamplingStrategy::CPS, std::move(order));
}

inline constexpr std::size_t kDensifyBelowVertices = 5000;
inline constexpr std::size_t kDensifiedPointCount = 10000;

/// The cloud a strategy runs on for a given mesh. CPS on a sparse mesh with
/// faces uses a seeded area-weighted surface sample instead of the vertices.
inline PointCloud sampling_cloud(const TriangleMesh& mesh, SamplingStrategy strategy,
                                 std::uint64_t seed = 0) {
  if (strategy == SamplingStrategy::CPS && mesh.has_faces() &&
      mesh.vertices.size() < kDensifyBelowVertices)
    return sample_surface(mesh, kDensifiedPointCount, seed);
  return mesh.vertices;
}

struct SelectionOptions {
  SamplingStrategy strategy = SamplingStrategy::FPS;
  std::size_t k = kDefaultKeypointCount;
  std::size_t fps_start = 0;
  CurvatureParams curvature;
  std::uint64_t densify_seed = 0;
};

inline KeypointSet select_keypoints(const TriangleMesh& mesh, const SelectionOptions& opt,
                                    const std::string& object_id = {}) {
  validate(mesh.vertices);
  const PointCloud cloud = sampling_cloud(mesh, opt.strategy, opt.densify_seed);
  KeypointSet out = opt.strategy == SamplingStrategy::FPS ? fps(cloud, opt.k, opt.fps_start)
                                                          : cps(cloud, opt.k, opt.curvature);
  out.object_id = object_id;
  return out;
}

/// Coverage statistics of a keypoint set.
struct SpreadStats {
  double min_pairwise = 0.0;
  double mean_nearest = 0.0;
};

inline SpreadStats spread(const std::vector<Vec3>& pts) {
  SpreadStats s;
  if (pts.size() < 2) return s;
  double global_min = std::numeric_limits<double>::infinity();
  double sum_nearest = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j) nearest = std::min(nearest, dist2(pts[i], pts[j]));
    global_min = std::min(global_min, nearest);
    sum_nearest += std::sqrt(nearest);
  }
  s.min_pairwise = std::sqrt(global_min);
  s.mean_nearest = sum_nearest / static_cast<double>(pts.size());
  return s;
}

}  // namespace kpose
