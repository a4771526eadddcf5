#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "kdsm/errors.hpp"
#include "kdsm/level_set.hpp"

using namespace kdsm;

namespace {

// Sphere of radius 5 at the origin; nodes sit on integer coordinates.
const ScalarGrid& sphere_grid() {
  static const ScalarGrid g = build_level_set(test::icosphere(5.0, 3), 1.0, 4.0);
  return g;
}

ScalarGrid linear_grid(const Vec3& n, double b) {
  ScalarGrid g;
  g.origin = Vec3(-1, 2, 0.5);
  g.dx = 0.5;
  g.dims = {5, 4, 6};
  g.values.resize(g.num_nodes());
  for (int i = 0; i < g.dims[0]; ++i)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int k = 0; k < g.dims[2]; ++k) g.values[g.index(i, j, k)] = g.node(i, j, k).dot(n) + b;
  return g;
}

}  // namespace

TEST(LevelSet, SphereCenterAndOutside) {
  const ScalarGrid& g = sphere_grid();
  EXPECT_NEAR(sample(g, Vec3::Zero()), -5.0, g.dx);
  EXPECT_NEAR(sample(g, Vec3(8, 0, 0)), 3.0, g.dx);
  EXPECT_NEAR(sample(g, Vec3(0, -8, 0)), 3.0, g.dx);
}

TEST(LevelSet, SignOfConvexBody) {
  const ScalarGrid& g = sphere_grid();
  for (int i = 0; i < g.dims[0]; ++i)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int k = 0; k < g.dims[2]; ++k) {
        const double r = g.node(i, j, k).norm();
        if (r < 4.9) EXPECT_LT(g.at(i, j, k), 0.0);
        if (r > 5.01) EXPECT_GT(g.at(i, j, k), 0.0);
      }
}

TEST(LevelSet, SurfaceNodeOfCube) {
  TriangleMesh cube = test::unit_cube();
  for (auto& v : cube.vertices) v *= 4.0;
  const ScalarGrid g = build_level_set(cube, 1.0, 2.0);
  EXPECT_NEAR(sample(g, Vec3(0, 2, 2)), 0.0, g.dx);
  EXPECT_NEAR(sample(g, Vec3(2, 2, 2)), -2.0, 1e-12);
  EXPECT_NEAR(sample(g, Vec3(-2, 2, 2)), 2.0, 1e-12);
}

TEST(LevelSet, OpenMeshRejected) {
  TriangleMesh m = test::unit_cube();
  m.triangles.pop_back();
  EXPECT_THROW(build_level_set(m, 0.25, 0.5), OpenMeshError);
}

TEST(LevelSet, OverlappingComponentsUnion) {
  TriangleMesh m = test::icosphere(2.0, 2);
  const TriangleMesh other = test::icosphere(2.0, 2, Vec3(2, 0, 0));
  const int off = static_cast<int>(m.num_vertices());
  for (const auto& v : other.vertices) m.vertices.push_back(v);
  for (auto t : other.triangles) m.triangles.push_back({t[0] + off, t[1] + off, t[2] + off});
  // Inside both spheres: a single global parity would call this outside.
  EXPECT_TRUE(inside_closed_mesh(m, Vec3(1, 0.1, 0.05)));
  EXPECT_FALSE(inside_closed_mesh(m, Vec3(1, 3, 0)));
}

TEST(Thicken, Definition) {
  const ScalarGrid& g = sphere_grid();
  const ScalarGrid same = thicken(g, 0.0);
  EXPECT_EQ(same.values, g.values);
  const ScalarGrid t = thicken(g, 2.0);
  for (std::size_t i = 0; i < g.values.size(); ++i) EXPECT_EQ(t.values[i], g.values[i] - 2.0);
  const ScalarGrid ab = thicken(thicken(g, 1.25), 0.75);
  for (std::size_t i = 0; i < g.values.size(); ++i) EXPECT_NEAR(ab.values[i], t.values[i], 1e-12);
}

TEST(Thicken, SphereIsoContourMoves) {
  const ScalarGrid t = thicken(sphere_grid(), 2.0);
  EXPECT_NEAR(sample(t, Vec3(7, 0, 0)), 0.0, 1.0);
  EXPECT_NEAR(sample(t, Vec3(0, 0, -7)), 0.0, 1.0);
  EXPECT_LT(sample(t, Vec3(6, 0, 0)), 0.0);
  EXPECT_GT(sample(t, Vec3(8, 0, 0)), 0.0);
}

TEST(Sample, NodesCentersAndLinears) {
  const Vec3 n(0.3, -1.2, 0.7);
  const ScalarGrid g = linear_grid(n, 0.4);
  EXPECT_EQ(sample(g, g.node(2, 1, 3)), g.at(2, 1, 3));
  double mean = 0;
  for (int c = 0; c < 8; ++c) mean += g.at(1 + (c & 1), 1 + ((c >> 1) & 1), 2 + ((c >> 2) & 1));
  EXPECT_NEAR(sample(g, g.node(1, 1, 2) + Vec3::Constant(0.5 * g.dx)), mean / 8.0, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 ext = g.max_corner() - g.origin;
  for (int s = 0; s < 200; ++s) {
    const Vec3 p = g.origin + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(ext);
    EXPECT_NEAR(sample(g, p), p.dot(n) + 0.4, 1e-9);
  }
  EXPECT_NEAR(sample(g, g.max_corner()), g.max_corner().dot(n) + 0.4, 1e-12);
  EXPECT_THROW(sample(g, g.max_corner() + Vec3(0.1, 0, 0)), OutOfBounds);
}

TEST(GridIo, RoundTrip) {
  const ScalarGrid g = linear_grid(Vec3(1, 2, 3), -1.0);
  std::stringstream ss;
  write_grid(ss, g);
  const ScalarGrid r = read_grid(ss);
  EXPECT_EQ(r.dims, g.dims);
  EXPECT_EQ(r.dx, g.dx);
  EXPECT_EQ(r.origin, g.origin);
  EXPECT_EQ(r.values, g.values);
}
