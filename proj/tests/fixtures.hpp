#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "kdsm/geometry.hpp"
#include "kdsm/level_set.hpp"
#include "kdsm/skinning.hpp"
#include "kdsm/tet_lattice.hpp"

namespace kdsm::test {

inline TetVertices unit_tet() {
  return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
}

// Closed unit cube [0,1]^3, outward-facing.
inline TriangleMesh unit_cube() {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

inline TriangleMesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();
  return m;
}

// Subdivided icosahedron on a sphere of the given radius and center.
inline TriangleMesh icosphere(double radius, int levels, const Vec3& center = Vec3::Zero()) {
  TriangleMesh m = icosahedron();
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      m.vertices.push_back((m.vertices[static_cast<std::size_t>(a)] + m.vertices[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(m.vertices.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    for (const auto& t : m.triangles) {
      const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) v = center + radius * v;
  return m;
}

inline TetVertices random_tet(std::mt19937_64& rng, double min_volume = 1e-3) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    TetVertices t;
    for (auto& v : t) v = Vec3(u(rng), u(rng), u(rng));
    if (std::abs(signed_tet_volume(t)) > min_volume) return t;
  }
}

// Grid with phi < 0 everywhere: every lattice tet is kept.
inline ScalarGrid solid_grid(int cells, double dx = 1.0) {
  ScalarGrid g;
  g.dx = dx;
  g.dims = {cells + 1, cells + 1, cells + 1};
  g.values.assign(g.num_nodes(), -1.0);
  return g;
}

// Two-joint chain along +x: root at the origin, child at (len, 0, 0).
inline Skeleton two_joint_chain(double len = 10.0) {
  Skeleton s;
  s.joints.push_back({"root", -1, Affine::identity()});
  s.joints.push_back({"child", 0, Affine::translation(Vec3(len, 0, 0))});
  return s;
}

// Solid BCC block with every vertex jittered by up to `jitter` cells.
inline TetMesh jittered_lattice(int cells, double jitter, std::uint64_t seed) {
  TetMesh m = build_lattice(solid_grid(cells), 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  for (auto& v : m.rest_vertices) v += Vec3(u(rng), u(rng), u(rng));
  return m;
}

// Point with the given barycentric weights in a tet.
inline Vec3 at_bary(const TetVertices& t, const std::array<double, 4>& w) {
  return w[0] * t[0] + w[1] * t[1] + w[2] * t[2] + w[3] * t[3];
}

}  // namespace kdsm::test
