#pragma once

// Reference implementations used only by the tests. They deliberately take
// the slow, obvious route and share no code with the library internals.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "kpose/geometry.hpp"
#include "kpose/heatmap.hpp"
#include "kpose/mesh.hpp"

namespace oracle {

using kpose::Vec2;
using kpose::Vec3;

/// Greedy max-min selection recomputing every min-distance from scratch.
inline std::vector<std::size_t> fps(const std::vector<Vec3>& pts, std::size_t k, std::size_t start) {
  std::vector<std::size_t> sel{start};
  while (sel.size() < k) {
    std::size_t best = pts.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double m = std::numeric_limits<double>::infinity();
      for (auto s : sel) m = std::min(m, (pts[i] - pts[s]).squaredNorm());
      if (m > best_d) {
        best_d = m;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

/// Eigenvalues of a symmetric 3x3 matrix by the closed-form trigonometric
/// solution of the characteristic cubic, ascending.
inline std::array<double, 3> sym3_eigenvalues(const Eigen::Matrix3d& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  std::array<double, 3> ev{};
  if (p1 == 0.0) {
    ev = {a(0, 0), a(1, 1), a(2, 2)};
  } else {
    const double q = a.trace() / 3.0;
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Eigen::Matrix3d b = (a - q * Eigen::Matrix3d::Identity()) / p;
    const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e_hi = q + 2.0 * p * std::cos(phi);
    const double e_lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    ev = {e_lo, 3.0 * q - e_lo - e_hi, e_hi};
  }
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Curvature with a full sort for neighbours and closed-form eigenvalues.
inline std::vector<double> curvature(const std::vector<Vec3>& pts, std::size_t k, double eps) {
  std::vector<double> out(pts.size());
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double da = (pts[a] - pts[i]).squaredNorm(), db = (pts[b] - pts[i]).squaredNorm();
      return da < db || (da == db && a < b);
    });
    Vec3 mean = Vec3::Zero();
    for (std::size_t j = 0; j < k; ++j) mean += pts[idx[j]];
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t j = 0; j < k; ++j) cov += (pts[idx[j]] - mean) * (pts[idx[j]] - mean).transpose();
    cov /= static_cast<double>(k);
    auto ev = sym3_eigenvalues(cov);
    for (auto& e : ev) e = std::max(e, 0.0);
    const double denom = ev[0] + ev[1] + ev[2] + eps;
    out[i] = denom > 0.0 ? ev[0] / denom : 0.0;
  }
  return out;
}

/// Full sort of curvature * centroid distance; returns the top-k index set.
inline std::vector<std::size_t> cps_topk(const std::vector<Vec3>& pts, std::size_t k,
                                         std::size_t k_neighbors, double eps) {
  const auto kappa = curvature(pts, k_neighbors, eps);
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  std::vector<double> score(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) score[i] = kappa[i] * (pts[i] - c).norm();
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

/// Scalar per-pixel focal loss in the non-negative convention.
inline double focal_loss(const kpose::HeatmapStack& pred, const kpose::HeatmapStack& target,
                         double gamma, double beta, double eps) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    double p = pred.data[i];
    const double y = target.data[i];
    p = std::min(std::max(p, eps), 1.0 - eps);
    if (y >= 1.0 - 1e-9)
      sum += std::pow(1.0 - p, gamma) * std::log(p);
    else
      sum += std::pow(1.0 - y, beta) * std::pow(p, gamma) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(pred.data.size());
}

inline double add(const kpose::Pose& a, const kpose::Pose& b, const std::vector<Vec3>& pts) {
  double sum = 0.0;
  for (const auto& x : pts) {
    const Vec3 pa = a.rotation * x + a.translation;
    const Vec3 pb = b.rotation * x + b.translation;
    sum += std::sqrt((pa - pb).dot(pa - pb));
  }
  return sum / static_cast<double>(pts.size());
}

inline double add_s(const kpose::Pose& a, const kpose::Pose& b, const std::vector<Vec3>& pts) {
  double sum = 0.0;
  for (const auto& x1 : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x2 : pts) {
      const Vec3 d = (a.rotation * x1 + a.translation) - (b.rotation * x2 + b.translation);
      best = std::min(best, d.norm());
    }
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

inline double diameter(const std::vector<Vec3>& pts) {
  double best = 0.0;
  for (const auto& a : pts)
    for (const auto& b : pts) best = std::max(best, (a - b).norm());
  return best;
}

/// Central finite difference.
template <typename F>
double central_diff(F f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
