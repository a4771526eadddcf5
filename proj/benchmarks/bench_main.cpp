#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "kdsm/displacement_model.hpp"
#include "kdsm/embedding.hpp"
#include "kdsm/pipeline.hpp"
#include "kdsm/poisson_morph.hpp"
#include "kdsm/synthetic.hpp"

using namespace kdsm;

namespace {

const Scene& scene() {
  static const Scene s = build_scene(PipelineConfig{});
  return s;
}

const Kdsm& kdsm_mesh() {
  static const Kdsm k = [] {
    const PipelineConfig c;
    return build_kdsm(scene().mannequin.body, scene().mannequin.bones, c.dx, c.h, c.thicken, c.eps_box);
  }();
  return k;
}

const Pose& sample_pose() {
  static const Pose p = sample_poses(scene().mannequin.skeleton, 2, 7, 0).poses[1];
  return p;
}

std::vector<Vec3> random_in_box(std::size_t n, std::uint64_t seed) {
  const auto& v = kdsm_mesh().mesh.rest_vertices;
  Vec3 lo = v[0], hi = v[0];
  for (const auto& p : v) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = lo + (hi - lo).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
  return out;
}

void BM_Barycentric(benchmark::State& state) {
  const TetVertices t = {Vec3(0, 0, 0), Vec3(1, 0.1, 0), Vec3(0.2, 1, 0), Vec3(0, 0.3, 1)};
  Vec3 p(0.2, 0.2, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(barycentric_coords(p, t));
    p.x() += 1e-9;
  }
}
BENCHMARK(BM_Barycentric);

void BM_CandidateQuery(benchmark::State& state) {
  const TetLocator& loc = *kdsm_mesh().rest;
  const auto pts = random_in_box(4096, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loc.candidates(pts[i++ & 4095]));
  }
}
BENCHMARK(BM_CandidateQuery);

void BM_BuildLocator(benchmark::State& state) {
  const auto& m = kdsm_mesh().mesh;
  for (auto _ : state) {
    TetLocator loc(m.rest_vertices, m.tets, kDefaultEpsBox);
    benchmark::DoNotOptimize(loc.typical_size());
  }
}
BENCHMARK(BM_BuildLocator)->Unit(benchmark::kMillisecond);

void BM_SkinKdsm(benchmark::State& state) {
  const auto& m = kdsm_mesh().mesh;
  const auto xf = skinning_transforms(scene().mannequin.skeleton, sample_pose());
  for (auto _ : state) {
    benchmark::DoNotOptimize(skin_vertices(m.rest_vertices, m.skin_weights, xf));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.num_vertices()));
}
BENCHMARK(BM_SkinKdsm)->Unit(benchmark::kMillisecond);

void BM_SkinEmbeddedCloth(benchmark::State& state) {
  const auto& m = kdsm_mesh().mesh;
  const Embedding emb = embed_rest(scene().cloth.mesh.vertices, *kdsm_mesh().rest);
  const auto xf = skinning_transforms(scene().mannequin.skeleton, sample_pose());
  for (auto _ : state) {
    benchmark::DoNotOptimize(skin_embedded(emb, m.tets, m.rest_vertices, m.skin_weights, xf));
  }
}
BENCHMARK(BM_SkinEmbeddedCloth)->Unit(benchmark::kMicrosecond);

void BM_PoissonMorph(benchmark::State& state) {
  const auto& cloth = scene().cloth;
  const std::size_t n = cloth.num_vertices();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
  std::normal_distribution<double> g(0, 1);
  std::map<int, Vec3> fixed;
  while (static_cast<std::int64_t>(fixed.size()) < state.range(0)) fixed.emplace(pick(rng), Vec3(g(rng), g(rng), g(rng)));
  std::vector<Vec3> src(n);
  for (auto& s : src) s = Vec3(g(rng), g(rng), g(rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(poisson_morph(n, scene().cloth_edges, src, fixed));
  }
}
BENCHMARK(BM_PoissonMorph)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const auto& cloth = scene().cloth;
  DisplacementField f;
  f.d.resize(cloth.num_vertices());
  for (std::size_t i = 0; i < f.d.size(); ++i) f.d[i] = Vec3(std::sin(i), std::cos(i), 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize(f, cloth));
  }
}
BENCHMARK(BM_Rasterize)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
