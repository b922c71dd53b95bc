#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "kpose/geometry.hpp"

namespace kpose {

/// Squared distance with a fixed summation order. Brute-force and tree
/// searches both go through this function so their results agree exactly.
inline double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return (dx * dx + dy * dy) + dz * dz;
}

struct Neighbor {
  std::size_t index;
  double d2;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
  }
};

/// Exact k-nearest-neighbour search by full scan; ties go to the lower index.
/// Result is sorted by (distance, index).
inline std::vector<Neighbor> knn_brute_force(std::span<const Vec3> points, const Vec3& query,
                                             std::size_t k) {
  std::vector<Neighbor> heap;
  k = std::min(k, points.size());
  if (k == 0) return heap;
  heap.reserve(k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Neighbor cand{i, dist2(points[i], query)};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end());
    } else if (cand < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end());
    }
  }
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

/// Static 3-d tree over a borrowed point array. Queries return exactly what
/// the brute-force scan returns, including the (distance, index) tie order.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 16)
      : points_(points), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    order_.resize(points.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points.empty()) build(0, order_.size());
  }

  std::size_t size() const { return points_.size(); }

  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    std::vector<Neighbor> heap;
    k = std::min(k, points_.size());
    if (k == 0) return heap;
    heap.reserve(k + 1);
    knn_recurse(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  Neighbor nearest(const Vec3& query) const { return knn(query, 1).front(); }

  /// Largest pairwise squared distance, by branch and bound over node pairs.
  double farthest_pair_d2() const {
    if (points_.size() < 2) return 0.0;
    double best = 0.0;
    // Seed the bound with a double sweep from an arbitrary point.
    std::size_t a = 0;
    for (int sweep = 0; sweep < 2; ++sweep) {
      std::size_t far = a;
      double far_d2 = -1.0;
      for (std::size_t i = 0; i < points_.size(); ++i) {
        const double d = dist2(points_[a], points_[i]);
        if (d > far_d2) {
          far_d2 = d;
          far = i;
        }
      }
      best = std::max(best, far_d2);
      a = far;
    }
    farthest_recurse(0, 0, best);
    return best;
  }

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    std::size_t begin;
    std::size_t end;
    std::int64_t left = -1;
    std::int64_t right = -1;
    bool leaf() const { return left < 0; }
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = node.hi = points_[order_[begin]];
    for (std::size_t i = begin + 1; i < end; ++i) {
      node.lo = node.lo.cwiseMin(points_[order_[i]]);
      node.hi = node.hi.cwiseMax(points_[order_[i]]);
    }
    const std::size_t id = nodes_.size();
    nodes_.push_back(node);
    if (end - begin <= leaf_size_) return id;

    int axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t i, std::size_t j) {
                       const double a = points_[i][axis];
                       const double b = points_[j][axis];
                       return a < b || (a == b && i < j);
                     });
    const std::size_t l = build(begin, mid);
    const std::size_t r = build(mid, end);
    nodes_[id].left = static_cast<std::int64_t>(l);
    nodes_[id].right = static_cast<std::int64_t>(r);
    return id;
  }

  static double box_min_d2(const Node& n, const Vec3& q) {
    double g[3];
    for (int i = 0; i < 3; ++i) g[i] = std::max({n.lo[i] - q[i], 0.0, q[i] - n.hi[i]});
    return (g[0] * g[0] + g[1] * g[1]) + g[2] * g[2];
  }

  static double box_max_d2(const Node& a, const Node& b) {
    double g[3];
    for (int i = 0; i < 3; ++i) g[i] = std::max(a.hi[i] - b.lo[i], b.hi[i] - a.lo[i]);
    return (g[0] * g[0] + g[1] * g[1]) + g[2] * g[2];
  }

  void knn_recurse(std::size_t id, const Vec3& q, std::size_t k,
                   std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[id];
    // Equal distances must still be visited so the index tie-break matches brute force.
    if (heap.size() == k && box_min_d2(n, q) > heap.front().d2) return;
    if (n.leaf()) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], dist2(points_[order_[i]], q)};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const auto l = static_cast<std::size_t>(n.left);
    const auto r = static_cast<std::size_t>(n.right);
    if (box_min_d2(nodes_[l], q) <= box_min_d2(nodes_[r], q)) {
      knn_recurse(l, q, k, heap);
      knn_recurse(r, q, k, heap);
    } else {
      knn_recurse(r, q, k, heap);
      knn_recurse(l, q, k, heap);
    }
  }

  void farthest_recurse(std::size_t ia, std::size_t ib, double& best) const {
    const Node& a = nodes_[ia];
    const Node& b = nodes_[ib];
    if (box_max_d2(a, b) <= best) return;
    if (a.leaf() && b.leaf()) {
      for (std::size_t i = a.begin; i < a.end; ++i)
        for (std::size_t j = b.begin; j < b.end; ++j)
          best = std::max(best, dist2(points_[order_[i]], points_[order_[j]]));
      return;
    }
    // Split the larger (or only splittable) node.
    const bool split_a = !a.leaf() && (b.leaf() || (a.end - a.begin) >= (b.end - b.begin));
    if (split_a) {
      farthest_recurse(static_cast<std::size_t>(a.left), ib, best);
      farthest_recurse(static_cast<std::size_t>(a.right), ib, best);
    } else {
      farthest_recurse(ia, static_cast<std::size_t>(b.left), best);
      farthest_recurse(ia, static_cast<std::size_t>(b.right), best);
    }
  }

  std::span<const Vec3> points_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace kpose
