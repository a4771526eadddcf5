#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "kdsm/point_location.hpp"

using namespace kdsm;

namespace {

CandidateList brute_force(const Vec3& p, const TetMesh& m, double eps) {
  CandidateList out;
  for (std::size_t t = 0; t < m.num_tets(); ++t) {
    auto c = evaluate_candidate(p, m.rest_vertices, m.tets, static_cast<int>(t));
    if (c && c->min_weight >= -eps) out.push_back(*c);
  }
  std::sort(out.begin(), out.end(), candidate_before);
  return out;
}

std::vector<int> ids(const CandidateList& l) {
  std::vector<int> v;
  for (const auto& c : l) v.push_back(c.tet);
  return v;
}

// Two face-adjacent tets sharing face (1, 2, 3).
TetMesh face_pair() {
  TetMesh m;
  m.rest_vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  m.tets = {{{0, 1, 2, 3}}, {{4, 1, 3, 2}}};
  return m;
}

}  // namespace

TEST(Bvh, SingleTet) {
  const auto t = test::unit_tet();
  const std::vector<Vec3> v(t.begin(), t.end());
  const std::vector<Tetrahedron> tets = {{{0, 1, 2, 3}}};
  const TetBvh bvh = build_bvh(v, tets, 1e-3);
  EXPECT_EQ(bvh.nodes().size(), 1u);
  EXPECT_TRUE(bvh.nodes()[0].is_leaf());
  EXPECT_EQ(bvh.query(Vec3::Constant(0.2)), std::vector<int>{0});
  EXPECT_TRUE(bvh.query(Vec3(5, 5, 5)).empty());
}

TEST(Bvh, MatchesBruteForceBoxes) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<Vec3> v;
  std::vector<Tetrahedron> tets;
  for (int t = 0; t < 1000; ++t) {
    const Vec3 c(u(rng), u(rng), u(rng));
    const TetVertices tv = test::random_tet(rng);
    const int base = static_cast<int>(v.size());
    for (const auto& p : tv) v.push_back(c + p);
    tets.push_back({{base, base + 1, base + 2, base + 3}});
  }
  const double eps_box = 1e-3;
  const TetBvh bvh = build_bvh(v, tets, eps_box);
  for (const auto& n : bvh.nodes()) {
    if (n.is_leaf()) {
      EXPECT_LE(n.end - n.begin, TetBvh::kLeafSize);
      for (int i = n.begin; i < n.end; ++i) EXPECT_TRUE(n.box.contains(bvh.tet_boxes()[static_cast<std::size_t>(bvh.order()[static_cast<std::size_t>(i)])]));
    } else {
      EXPECT_TRUE(n.box.contains(bvh.nodes()[static_cast<std::size_t>(n.left)].box));
      EXPECT_TRUE(n.box.contains(bvh.nodes()[static_cast<std::size_t>(n.right)].box));
    }
  }
  std::vector<int> order = bvh.order();
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], static_cast<int>(i));
  for (int q = 0; q < 1000; ++q) {
    const Vec3 p(u(rng), u(rng), u(rng));
    std::vector<int> expect;
    for (std::size_t t = 0; t < tets.size(); ++t) {
      Aabb box{Vec3::Constant(1e300), Vec3::Constant(-1e300)};
      for (int k : tets[t].v) {
        box.lo = box.lo.cwiseMin(v[static_cast<std::size_t>(k)]);
        box.hi = box.hi.cwiseMax(v[static_cast<std::size_t>(k)]);
      }
      box.lo -= Vec3::Constant(eps_box);
      box.hi += Vec3::Constant(eps_box);
      if (box.contains(p)) expect.push_back(static_cast<int>(t));
    }
    EXPECT_EQ(bvh.query(p), expect);
  }
}

TEST(Candidates, InsideIsolatedTet) {
  const auto t = test::unit_tet();
  const std::vector<Vec3> v(t.begin(), t.end());
  const std::vector<Tetrahedron> tets = {{{0, 1, 2, 3}}};
  const TetLocator loc(v, tets);
  const auto l = loc.candidates(Vec3(0.1, 0.2, 0.3));
  ASSERT_EQ(l.size(), 1u);
  EXPECT_GT(l[0].min_weight, 0.0);
  EXPECT_TRUE(loc.candidates(Vec3(1, 1, 1)).empty());
}

TEST(Candidates, SharedFaceCentroid) {
  const TetMesh m = face_pair();
  const TetLocator loc(m.rest_vertices, m.tets);
  const Vec3 p = (m.rest_vertices[1] + m.rest_vertices[2] + m.rest_vertices[3]) / 3.0;
  const auto l = loc.candidates(p);
  ASSERT_EQ(l.size(), 2u);
  for (const auto& c : l) EXPECT_NEAR(c.min_weight, 0.0, kDefaultEps);
  EXPECT_EQ(ids(l), ids(brute_force(p, m, kDefaultEps)));
}

TEST(Candidates, MatchBruteForceOnDeformedLattices) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int mesh = 0; mesh < 5; ++mesh) {
    const TetMesh m = test::jittered_lattice(3, 0.3, 100 + mesh);
    ASSERT_GE(m.num_tets(), 200u);
    const TetLocator loc(m.rest_vertices, m.tets);
    for (int q = 0; q < 300; ++q) {
      Vec3 p;
      if (q % 3 == 0) {
        p = Vec3(u(rng), u(rng), u(rng)) * 3.6 - Vec3::Constant(0.3);
      } else {
        // Near a face of some tet, on either side of the tolerance.
        const auto& tet = m.tets[static_cast<std::size_t>(rng() % m.num_tets())];
        const TetVertices tv = gather_tet(m.rest_vertices, tet);
        const double off = (q % 3 == 1 ? -0.5 : -2.0) * kDefaultEps;
        const double a = u(rng), b = u(rng) * (1 - a);
        p = test::at_bary(tv, {off, a, b, 1.0 - off - a - b});
      }
      EXPECT_EQ(ids(loc.candidates(p)), ids(brute_force(p, m, kDefaultEps)));
    }
  }
}

TEST(Candidates, LargerEpsIsSuperset) {
  const TetMesh m = test::jittered_lattice(3, 0.3, 5);
  const TetLocator loc(m.rest_vertices, m.tets);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int q = 0; q < 200; ++q) {
    const Vec3 p(u(rng), u(rng), u(rng));
    auto small = ids(loc.candidates(p, 1e-4));
    auto big = ids(loc.candidates(p, 1e-2));
    std::sort(small.begin(), small.end());
    std::sort(big.begin(), big.end());
    EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
  }
}

TEST(Prune, SingleEntryUnchanged) {
  const TetMesh m = face_pair();
  const TetLocator loc(m.rest_vertices, m.tets);
  const auto l = loc.candidates(Vec3(0.1, 0.1, 0.1));
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(ids(prune_candidates(l, m.tets)), ids(l));
}

TEST(Prune, FaceNeighborRemoved) {
  const TetMesh m = face_pair();
  const TetVertices a = gather_tet(m.rest_vertices, m.tets[0]);
  // Deep in A on the side of the shared face; B sees it just outside.
  const Vec3 p = test::at_bary(a, {0.1, 0.3, 0.3, 0.3});
  const Vec3 q = test::at_bary(a, {1e-9 / 3.0, (1 - 1e-9 / 3.0) / 3.0, (1 - 1e-9 / 3.0) / 3.0, (1 - 1e-9 / 3.0) / 3.0});
  const TetLocator loc(m.rest_vertices, m.tets);
  auto lp = loc.candidates(p);
  ASSERT_EQ(lp.size(), 1u);
  auto lq = loc.candidates(q);
  ASSERT_EQ(lq.size(), 2u);
  EXPECT_EQ(lq[0].tet, 0);
  const auto pruned = prune_candidates(lq, m.tets);
  ASSERT_EQ(pruned.size(), 1u);
  EXPECT_EQ(pruned[0].tet, 0);
}

TEST(Prune, DisjointOverlapKeepsBoth) {
  TetMesh m;
  const auto t = test::unit_tet();
  for (const auto& v : t) m.rest_vertices.push_back(v);
  for (const auto& v : t) m.rest_vertices.push_back(v * 1.2 - Vec3::Constant(0.05));
  m.tets = {{{0, 1, 2, 3}}, {{4, 5, 6, 7}}};
  const TetLocator loc(m.rest_vertices, m.tets);
  const auto l = loc.pruned(Vec3(0.2, 0.2, 0.2));
  EXPECT_EQ(l.size(), 2u);
}

TEST(Prune, FirstIsDeepestAndDeterministic) {
  const TetMesh m = test::jittered_lattice(3, 0.35, 9);
  const TetLocator loc(m.rest_vertices, m.tets);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.2, 2.8);
  for (int q = 0; q < 300; ++q) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto l = loc.candidates(p);
    if (l.empty()) continue;
    const auto a = prune_candidates(l, m.tets);
    EXPECT_EQ(ids(a), ids(prune_candidates(l, m.tets)));
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a.front().tet, l.front().tet);
    for (const auto& c : l) EXPECT_LE(c.min_weight, a.front().min_weight);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_TRUE(candidate_before(a[i - 1], a[i]));
  }
}

TEST(Nearest, OutsideFindsClosestByWeight) {
  const TetMesh m = face_pair();
  const TetLocator loc(m.rest_vertices, m.tets);
  const Vec3 p(-0.5, 0.2, 0.2);
  EXPECT_TRUE(loc.candidates(p).empty());
  const auto c = loc.best_or_nearest(p, kDefaultEps, 5.0);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->tet, 0);
  EXPECT_LT(c->min_weight, 0.0);
  EXPECT_FALSE(loc.best_or_nearest(Vec3(100, 0, 0), kDefaultEps, 5.0).has_value());
}

TEST(Simplex, Projection) {
  const BaryCoords in = BaryCoords::from_last_three(0.2, 0.3, 0.4);
  const BaryCoords same = project_to_simplex(in);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(same[k], in[k], 1e-15);
  BaryCoords out;
  out.w = {-0.5, 0.5, 0.5, 0.5};
  const BaryCoords p = project_to_simplex(out);
  EXPECT_EQ(p[0], 0.0);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(p[k], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(p.sum(), 1.0);
}
