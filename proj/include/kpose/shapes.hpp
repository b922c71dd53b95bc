#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "kpose/mesh.hpp"

// Procedural object models for tests and the synthetic benchmark.

namespace kpose::shapes {

/// Axis-aligned box centred at the origin; each face is an n x n quad grid.
inline TriangleMesh box(double sx, double sy, double sz, std::uint32_t n = 4) {
  TriangleMesh mesh;
  const Vec3 half(sx / 2, sy / 2, sz / 2);
  auto add_face = [&](const Vec3& origin, const Vec3& du, const Vec3& dv) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (std::uint32_t j = 0; j <= n; ++j)
      for (std::uint32_t i = 0; i <= n; ++i)
        mesh.vertices.points.push_back(origin + du * (static_cast<double>(i) / n) +
                                       dv * (static_cast<double>(j) / n));
    for (std::uint32_t j = 0; j < n; ++j)
      for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t a = base + j * (n + 1) + i;
        const std::uint32_t b = a + 1;
        const std::uint32_t c = a + (n + 1);
        const std::uint32_t d = c + 1;
        mesh.faces.push_back({a, b, d});
        mesh.faces.push_back({a, d, c});
      }
  };
  const Vec3 ex(sx, 0, 0), ey(0, sy, 0), ez(0, 0, sz);
  add_face(-half, ey, ex);                          // z-
  add_face(Vec3(-half.x(), -half.y(), half.z()), ex, ey);  // z+
  add_face(-half, ex, ez);                          // y-
  add_face(Vec3(-half.x(), half.y(), -half.z()), ez, ex);  // y+
  add_face(-half, ez, ey);                          // x-
  add_face(Vec3(half.x(), -half.y(), -half.z()), ey, ez);  // x+
  return mesh;
}

/// UV ellipsoid with semi-axes (a, b, c).
inline TriangleMesh ellipsoid(double a, double b, double c, std::uint32_t rings = 24,
                              std::uint32_t segments = 48) {
  TriangleMesh mesh;
  mesh.vertices.points.emplace_back(0, 0, c);
  for (std::uint32_t r = 1; r < rings; ++r) {
    const double theta = std::numbers::pi * r / rings;
    for (std::uint32_t s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.points.emplace_back(a * std::sin(theta) * std::cos(phi),
                                        b * std::sin(theta) * std::sin(phi), c * std::cos(theta));
    }
  }
  mesh.vertices.points.emplace_back(0, 0, -c);
  const auto south = static_cast<std::uint32_t>(mesh.vertices.size() - 1);
  auto ring_idx = [&](std::uint32_t r, std::uint32_t s) { return 1 + (r - 1) * segments + (s % segments); };
  for (std::uint32_t s = 0; s < segments; ++s) mesh.faces.push_back({0, ring_idx(1, s), ring_idx(1, s + 1)});
  for (std::uint32_t r = 1; r + 1 < rings; ++r)
    for (std::uint32_t s = 0; s < segments; ++s) {
      mesh.faces.push_back({ring_idx(r, s), ring_idx(r + 1, s), ring_idx(r + 1, s + 1)});
      mesh.faces.push_back({ring_idx(r, s), ring_idx(r + 1, s + 1), ring_idx(r, s + 1)});
    }
  for (std::uint32_t s = 0; s < segments; ++s)
    mesh.faces.push_back({ring_idx(rings - 1, s), south, ring_idx(rings - 1, s + 1)});
  return mesh;
}

/// The eight unit-cube corners in binary order: index bit 0 -> x, bit 1 -> y, bit 2 -> z.
inline PointCloud unit_cube_corners() {
  PointCloud pc;
  for (int i = 0; i < 8; ++i) pc.points.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  return pc;
}

}  // namespace kpose::shapes
