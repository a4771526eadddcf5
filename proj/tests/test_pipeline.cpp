#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "kdsm/io.hpp"
#include "kdsm/obj_io.hpp"
#include "kdsm/pipeline.hpp"

using namespace kdsm;
namespace fs = std::filesystem;

namespace {

const Scene& scene() {
  static const Scene s = build_scene(PipelineConfig{});
  return s;
}

const Kdsm& kdsm_default() {
  static const Kdsm k = [] {
    const PipelineConfig c;
    return build_kdsm(scene().mannequin.body, scene().mannequin.bones, c.dx, c.h, c.thicken, c.eps_box);
  }();
  return k;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kdsm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

double wrinkle_rms(const Pose& pose) {
  const Scene& s = scene();
  const auto gt = gen_synthetic_gt(pose, s.cloth, s.rig, s.mannequin.skeleton).positions;
  const auto lbs = skin_vertices(s.cloth.mesh.vertices, s.rig.weights, pose, s.mannequin.skeleton);
  double sum = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += (gt[i] - lbs[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(gt.size()));
}

}  // namespace

TEST(Mannequin, BodyAndWeights) {
  const Mannequin& m = scene().mannequin;
  EXPECT_EQ(m.skeleton.size(), 15u);
  EXPECT_NO_THROW(m.skeleton.validate());
  EXPECT_TRUE(m.body.has_uv());
  EXPECT_EQ(m.body_weights.per_vertex.size(), m.body.num_vertices());
  EXPECT_TRUE(boundary_loops(m.body).empty());
  EXPECT_GT(capped_mesh_volume(m.body), 0.0);
}

TEST(Shirt, TopologyAndAtlas) {
  const ClothMesh& c = scene().cloth;
  EXPECT_EQ(boundary_loops(c.mesh).size(), 4u);
  ASSERT_EQ(c.mesh.uv.size(), c.num_vertices());
  ASSERT_EQ(c.side.size(), c.num_vertices());
  for (const auto& uv : c.mesh.uv) {
    EXPECT_GE(uv.minCoeff(), 0.0);
    EXPECT_LE(uv.maxCoeff(), 1.0);
  }
  const auto fronts = std::count(c.side.begin(), c.side.end(), ClothSide::kFront);
  EXPECT_GT(fronts, 0);
  EXPECT_LT(static_cast<std::size_t>(fronts), c.num_vertices());
  int comps = 0;
  connected_components(c.num_vertices(), scene().cloth_edges, &comps);
  EXPECT_EQ(comps, 1);
  for (const auto& w : scene().rig.weights.per_vertex) {
    double s = 0;
    for (const auto& jw : w) s += jw.weight;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_LE(w.size(), kMaxInfluences);
  }
}

TEST(SyntheticGt, RestPoseIsRestCloth) {
  const Scene& s = scene();
  const auto f = gen_synthetic_gt(Pose::rest(s.mannequin.skeleton.size()), s.cloth, s.rig, s.mannequin.skeleton, 3);
  EXPECT_EQ(f.pose_id, 3);
  ASSERT_EQ(f.positions.size(), s.cloth.num_vertices());
  for (std::size_t i = 0; i < f.positions.size(); ++i) EXPECT_EQ(f.positions[i], s.cloth.mesh.vertices[i]);
}

TEST(SyntheticGt, DeterministicAndMonotoneInElbowBend) {
  const Scene& s = scene();
  const PoseSet set = sample_poses(s.mannequin.skeleton, 3, 9);
  const auto a = gen_synthetic_gt(set.poses[1], s.cloth, s.rig, s.mannequin.skeleton);
  const auto b = gen_synthetic_gt(set.poses[1], s.cloth, s.rig, s.mannequin.skeleton);
  EXPECT_EQ(a.positions, b.positions);
  const int elbow = s.mannequin.skeleton.find("l_elbow");
  ASSERT_GE(elbow, 0);
  Pose p45 = Pose::rest(s.mannequin.skeleton.size()), p90 = p45;
  p45.angles[static_cast<std::size_t>(elbow)] = Vec3(0, -std::numbers::pi / 4, 0);
  p90.angles[static_cast<std::size_t>(elbow)] = Vec3(0, -std::numbers::pi / 2, 0);
  EXPECT_GT(wrinkle_rms(p90), wrinkle_rms(p45));
  EXPECT_GT(wrinkle_rms(p45), 0.0);
}

TEST(Poses, SeededWithOverlapFrames) {
  const Skeleton& sk = scene().mannequin.skeleton;
  const PoseSet a = sample_poses(sk, 50, 4), b = sample_poses(sk, 50, 4), c = sample_poses(sk, 50, 5);
  ASSERT_EQ(a.poses.size(), 50u);
  EXPECT_EQ(std::count(a.overlap.begin(), a.overlap.end(), 1), 10);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.poses[i].angles, b.poses[i].angles);
    EXPECT_EQ(a.overlap[i], i % 5 == 4 ? 1 : 0);
  }
  EXPECT_NE(a.poses[0].angles, c.poses[0].angles);
  const PoseSet none = sample_poses(sk, 20, 4, 0);
  EXPECT_EQ(std::count(none.overlap.begin(), none.overlap.end(), 1), 0);
}

TEST(Metrics, DeltaD) {
  DisplacementField f;
  f.d.assign(4, Vec3(1, 2, 3));
  const std::vector<Edge> e = {{0, 1}, {1, 2}, {2, 3}};
  const MaxAvg c = delta_d_stats(f, e);
  EXPECT_EQ(c.max, 0.0);
  EXPECT_EQ(c.avg, 0.0);
  DisplacementField g;
  g.d = {Vec3::Zero(), Vec3(3, 4, 0)};
  const std::vector<Edge> one = {{0, 1}};
  const MaxAvg r = delta_d_stats(g, one);
  EXPECT_EQ(r.max, 5.0);
  EXPECT_EQ(r.avg, 5.0);
}

TEST(Metrics, VertexError) {
  std::vector<Vec3> gt(10, Vec3(1, 1, 1)), pred = gt;
  EXPECT_EQ(vertex_error(pred, gt).max, 0.0);
  pred[4] += Vec3(1, 0, 0);
  const MaxAvg e = vertex_error(pred, gt);
  EXPECT_EQ(e.max, 1.0);
  EXPECT_NEAR(e.avg, 0.1, 1e-15);
  pred.pop_back();
  EXPECT_THROW(vertex_error(pred, gt), ShapeMismatch);
}

TEST(Metrics, VolumeErrorOfInflation) {
  const TriangleMesh m = test::icosphere(10.0, 4);
  EXPECT_EQ(volume_error(m.vertices, m.vertices, m.triangles), 0.0);
  const auto n = vertex_normals(m.vertices, m.triangles);
  std::vector<Vec3> inflated(m.vertices.size());
  for (std::size_t i = 0; i < inflated.size(); ++i) inflated[i] = m.vertices[i] + 0.1 * n[i];
  const double v = capped_mesh_volume(m);
  const double err = volume_error(inflated, m.vertices, m.triangles);
  EXPECT_NEAR(err, 0.03 * v, 0.1 * 0.03 * v);
}

TEST(Metrics, MeanStd) {
  const std::vector<double> v = {1, 2, 3, 4};
  const MeanStd s = mean_std(v);
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(1.25), 1e-15);
  EXPECT_EQ(mean_std(std::vector<double>{}).mean, 0.0);
}

TEST(Split, ProportionsDeterministicDisjoint) {
  for (std::size_t n : {10u, 37u, 200u, 500u, 1001u}) {
    const Split s = split_dataset(n, 3);
    const double fn = static_cast<double>(n);
    EXPECT_LE(std::abs(static_cast<double>(s.train.size()) - 0.8 * fn), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(s.val.size()) - 0.1 * fn), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(s.test.size()) - 0.1 * fn), 1.0);
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), static_cast<int>(n) - 1);
    const Split again = split_dataset(n, 3);
    EXPECT_EQ(again.train, s.train);
    EXPECT_EQ(again.test, s.test);
  }
  EXPECT_NE(split_dataset(200, 3).test, split_dataset(200, 4).test);
}

TEST(Io, JsonRoundTrips) {
  const fs::path dir = scratch("io");
  const Mannequin& m = scene().mannequin;
  write_skeleton((dir / "sk.json").string(), m.skeleton, m.bones);
  std::vector<Bone> bones;
  const Skeleton sk = read_skeleton((dir / "sk.json").string(), &bones);
  ASSERT_EQ(sk.size(), m.skeleton.size());
  for (std::size_t j = 0; j < sk.size(); ++j) {
    EXPECT_EQ(sk.joints[j].name, m.skeleton.joints[j].name);
    EXPECT_EQ(sk.joints[j].parent, m.skeleton.joints[j].parent);
    EXPECT_EQ(sk.joints[j].rest.t, m.skeleton.joints[j].rest.t);
    EXPECT_EQ(sk.joints[j].rest.R, m.skeleton.joints[j].rest.R);
  }
  ASSERT_EQ(bones.size(), m.bones.size());
  EXPECT_EQ(bones[3].b, m.bones[3].b);

  const PoseSet p = sample_poses(m.skeleton, 7, 2);
  write_poses((dir / "p.json").string(), p);
  const PoseSet q = read_poses((dir / "p.json").string());
  ASSERT_EQ(q.poses.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(q.poses[i].angles, p.poses[i].angles);
    EXPECT_EQ(q.poses[i].root_translation, p.poses[i].root_translation);
  }
  EXPECT_EQ(q.overlap, p.overlap);

  write_weights((dir / "w.json").string(), scene().rig.weights);
  const SkinWeights w = read_weights((dir / "w.json").string());
  ASSERT_EQ(w.per_vertex.size(), scene().rig.weights.per_vertex.size());
  for (std::size_t i = 0; i < w.per_vertex.size(); i += 97) {
    ASSERT_EQ(w.per_vertex[i].size(), scene().rig.weights.per_vertex[i].size());
    for (std::size_t k = 0; k < w.per_vertex[i].size(); ++k) {
      EXPECT_EQ(w.per_vertex[i][k].joint, scene().rig.weights.per_vertex[i][k].joint);
      EXPECT_EQ(w.per_vertex[i][k].weight, scene().rig.weights.per_vertex[i][k].weight);
    }
  }

  PipelineConfig c;
  c.num_poses = 33;
  c.tau = 0.5;
  c.ranges.elbow_flex = 60;
  c.save_fields = "all";
  write_config((dir / "c.json").string(), c);
  const PipelineConfig r = read_config((dir / "c.json").string());
  EXPECT_EQ(r.num_poses, 33u);
  EXPECT_EQ(r.tau, 0.5);
  EXPECT_EQ(r.ranges.elbow_flex, 60.0);
  EXPECT_EQ(r.save_fields, "all");
  EXPECT_EQ(r.thicken, c.thicken);

  {
    std::ofstream bad(dir / "bad.json");
    bad << R"({"save_fields": "some"})";
  }
  EXPECT_THROW(read_config((dir / "bad.json").string()), FormatError);
  {
    std::ofstream bad(dir / "neg.json");
    bad << R"({"dx": -1})";
  }
  EXPECT_THROW(read_config((dir / "neg.json").string()), FormatError);
  EXPECT_THROW(read_config((dir / "missing.json").string()), FormatError);
  fs::remove_all(dir);
}

TEST(ClothObj, RoundTrip) {
  const fs::path dir = scratch("obj");
  write_cloth_obj((dir / "shirt.obj").string(), scene().cloth);
  const ClothMesh c = read_cloth_obj((dir / "shirt.obj").string());
  EXPECT_EQ(c.mesh.vertices, scene().cloth.mesh.vertices);
  EXPECT_EQ(c.mesh.triangles, scene().cloth.mesh.triangles);
  EXPECT_EQ(c.mesh.uv, scene().cloth.mesh.uv);
  EXPECT_EQ(c.side, scene().cloth.side);
  fs::remove_all(dir);
}

TEST(Kdsm, ShirtEmbedsWithoutEscapes) {
  const Kdsm& k = kdsm_default();
  const auto& cloth = scene().cloth.mesh.vertices;
  const Embedding e = embed_rest(cloth, *k.rest);
  const auto back = skin_embedded(e, k.mesh.tets, k.mesh.rest_vertices);
  double worst = 0;
  for (std::size_t i = 0; i < cloth.size(); ++i) worst = std::max(worst, (back[i] - cloth[i]).norm());
  EXPECT_LE(worst, 1e-9);
  EXPECT_EQ(k.mesh.skin_weights.per_vertex.size(), k.mesh.num_vertices());
}

TEST(Kdsm, ZeroPredictionAtRestIsRestCloth) {
  const Kdsm& k = kdsm_default();
  const Scene& s = scene();
  const auto xf = skinning_transforms(s.mannequin.skeleton, Pose::rest(s.mannequin.skeleton.size()));
  const Reconstruction r = infer_cloth(ClothImage::zeros(), s.cloth, *k.rest, k.mesh.skin_weights, xf);
  EXPECT_TRUE(r.no_parent.empty());
  EXPECT_TRUE(r.clamped.empty());
  EXPECT_LE(vertex_error(r.positions, s.cloth.mesh.vertices).max, 1e-6);
}

TEST(Kdsm, FrameLabelsAtRest) {
  const Scene& s = scene();
  const Kdsm& k = kdsm_default();
  const PipelineConfig cfg;
  const UvnTransfer uvn(s.mannequin.body, s.cloth.mesh.vertices);
  const FrameContext ctx{&s, &k, &uvn, &cfg};
  const FrameResult r = process_frame(ctx, Pose::rest(s.mannequin.skeleton.size()), 0, false);
  EXPECT_EQ(r.no_parent, 0u);
  for (int m = 0; m < 3; ++m) {
    for (const auto& d : r.fields[static_cast<std::size_t>(m)].d) EXPECT_LE(d.norm(), 1e-9);
    EXPECT_LE(r.label_error[static_cast<std::size_t>(m)].max, 1e-9);
  }
}

TEST(Kdsm, Method1ReproducesPosedFrames) {
  const Scene& s = scene();
  const Kdsm& k = kdsm_default();
  const PipelineConfig cfg;
  const UvnTransfer uvn(s.mannequin.body, s.cloth.mesh.vertices);
  const FrameContext ctx{&s, &k, &uvn, &cfg};
  const PoseSet set = sample_poses(s.mannequin.skeleton, 5, 21);
  for (std::size_t i = 0; i < set.poses.size(); ++i) {
    const FrameResult r = process_frame(ctx, set.poses[i], static_cast<int>(i), set.overlap[i] != 0);
    EXPECT_EQ(r.no_parent, 0u);
    EXPECT_LT(r.label_error[0].max, 1e-6);
    EXPECT_LE(r.label_error[2].avg, r.label_error[1].avg);
  }
}

TEST(Pipeline, SmokeRunIsReproducible) {
  const fs::path dir = scratch("smoke");
  PipelineConfig c;
  c.output_dir = dir.string();
  c.num_poses = 20;
  c.save_fields = "all";
  c.save_models = true;
  const PipelineResult a = run_pipeline(c);
  EXPECT_EQ(a.frames, 20u);
  EXPECT_EQ(a.overlap_frames, 4u);
  EXPECT_EQ(a.no_parent_total, 0u);
  EXPECT_GT(a.kdsm_tets, 0u);
  EXPECT_EQ(a.methods[2].test_errors.size(), 2u);
  EXPECT_LT(a.methods[0].label_max_error, 1e-6);
  for (const char* f : {"report.json", "histogram.csv", "poses.json", "split.json", "mask.bin",
                        "fields/hybrid/pose_0019.disp", "models/hybrid.model"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto first = snapshot(dir);
  const PipelineResult b = run_pipeline(c);
  EXPECT_EQ(snapshot(dir), first);
  EXPECT_EQ(b.methods[2].test_errors, a.methods[2].test_errors);
  fs::remove_all(dir);
}

TEST(Pipeline, TrainedModelBeatsMeanOnValidation) {
  const fs::path dir = scratch("p200");
  PipelineConfig c;
  c.output_dir = dir.string();
  c.num_poses = 200;
  c.save_fields = "none";
  const PipelineResult r = run_pipeline(c);
  EXPECT_LT(r.methods[2].val_error.mean, r.baseline.val_error.mean);
  EXPECT_LE(r.methods[2].test_error.mean, r.methods[0].test_error.mean);
  fs::remove_all(dir);
}
