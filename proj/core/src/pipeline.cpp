#include "kdsm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "kdsm/io.hpp"
#include "kdsm/obj_io.hpp"
#include "kdsm/parallel.hpp"

namespace kdsm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

class StageTimer {
 public:
  explicit StageTimer(const char* name) : name_(name), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::fprintf(stderr, "kdsm: %-10s %8.2f s\n", name_, s);
  }

 private:
  const char* name_;
  std::chrono::steady_clock::time_point start_;
};

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string pose_file(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pose_%04d.disp", id);
  return buf;
}

}  // namespace

PipelineConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  PipelineConfig c;
  try {
    read_key(j, "output_dir", c.output_dir);
    read_key(j, "num_poses", c.num_poses);
    read_key(j, "pose_seed", c.pose_seed);
    read_key(j, "scene_seed", c.scene_seed);
    read_key(j, "method1_seed", c.method1_seed);
    read_key(j, "split_seed", c.split_seed);
    read_key(j, "overlap_every", c.overlap_every);
    read_key(j, "dx", c.dx);
    read_key(j, "h", c.h);
    read_key(j, "thicken", c.thicken);
    read_key(j, "eps", c.eps);
    read_key(j, "eps_box", c.eps_box);
    read_key(j, "fallback_radius", c.fallback_radius);
    read_key(j, "tau", c.tau);
    read_key(j, "lambda", c.lambda);
    read_key(j, "save_fields", c.save_fields);
    read_key(j, "save_models", c.save_models);
    read_key(j, "threads", c.threads);
    read_key(j, "histogram_bins", c.histogram_bins);
    if (j.contains("mannequin")) {
      const auto& m = j["mannequin"];
      read_key(m, "segments", c.mannequin.segments);
      read_key(m, "ring_spacing", c.mannequin.ring_spacing);
    }
    if (j.contains("shirt")) {
      const auto& s = j["shirt"];
      read_key(s, "spacing", c.shirt.spacing);
      read_key(s, "torso_half_cells", c.shirt.torso_half_cells);
      read_key(s, "torso_cells_y", c.shirt.torso_cells_y);
      read_key(s, "neck_half_cells", c.shirt.neck_half_cells);
      read_key(s, "sleeve_cells_x", c.shirt.sleeve_cells_x);
      read_key(s, "sleeve_cells_y", c.shirt.sleeve_cells_y);
      read_key(s, "clearance", c.shirt.clearance);
      read_key(s, "rounding", c.shirt.rounding);
    }
    if (j.contains("wrinkles")) {
      const auto& w = j["wrinkles"];
      read_key(w, "amplitude", c.wrinkles.amplitude);
      read_key(w, "sigma", c.wrinkles.sigma);
      read_key(w, "wavelength", c.wrinkles.wavelength);
      read_key(w, "smoothing_iterations", c.wrinkles.smoothing_iterations);
    }
    if (j.contains("ranges")) {
      const auto& r = j["ranges"];
      read_key(r, "shoulder_down", c.ranges.shoulder_down);
      read_key(r, "shoulder_up", c.ranges.shoulder_up);
      read_key(r, "shoulder_swing", c.ranges.shoulder_swing);
      read_key(r, "shoulder_twist", c.ranges.shoulder_twist);
      read_key(r, "elbow_flex", c.ranges.elbow_flex);
      read_key(r, "spine", c.ranges.spine);
      read_key(r, "clavicle", c.ranges.clavicle);
      read_key(r, "neck", c.ranges.neck);
      read_key(r, "hip", c.ranges.hip);
      read_key(r, "overlap_min", c.ranges.overlap_min);
      read_key(r, "overlap_max", c.ranges.overlap_max);
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (c.save_fields != "none" && c.save_fields != "test" && c.save_fields != "all") {
    throw FormatError("save_fields must be none, test or all");
  }
  if (!(c.dx > 0.0) || c.h < 0.0 || c.thicken < 0.0 || !(c.tau > 0.0) || !(c.eps > 0.0)) {
    throw FormatError("config has a nonpositive length or tolerance");
  }
  return c;
}

namespace {

json config_json(const PipelineConfig& c) {
  return {
      {"output_dir", c.output_dir},
      {"num_poses", c.num_poses},
      {"pose_seed", c.pose_seed},
      {"scene_seed", c.scene_seed},
      {"method1_seed", c.method1_seed},
      {"split_seed", c.split_seed},
      {"overlap_every", c.overlap_every},
      {"dx", c.dx},
      {"h", c.h},
      {"thicken", c.thicken},
      {"eps", c.eps},
      {"eps_box", c.eps_box},
      {"fallback_radius", c.fallback_radius},
      {"tau", c.tau},
      {"lambda", c.lambda},
      {"save_fields", c.save_fields},
      {"save_models", c.save_models},
      {"threads", c.threads},
      {"histogram_bins", c.histogram_bins},
      {"mannequin", {{"segments", c.mannequin.segments}, {"ring_spacing", c.mannequin.ring_spacing}}},
      {"shirt",
       {{"spacing", c.shirt.spacing},
        {"torso_half_cells", c.shirt.torso_half_cells},
        {"torso_cells_y", c.shirt.torso_cells_y},
        {"neck_half_cells", c.shirt.neck_half_cells},
        {"sleeve_cells_x", c.shirt.sleeve_cells_x},
        {"sleeve_cells_y", c.shirt.sleeve_cells_y},
        {"clearance", c.shirt.clearance},
        {"rounding", c.shirt.rounding}}},
      {"wrinkles",
       {{"amplitude", c.wrinkles.amplitude},
        {"sigma", c.wrinkles.sigma},
        {"wavelength", c.wrinkles.wavelength},
        {"smoothing_iterations", c.wrinkles.smoothing_iterations}}},
      {"ranges",
       {{"shoulder_down", c.ranges.shoulder_down},
        {"shoulder_up", c.ranges.shoulder_up},
        {"shoulder_swing", c.ranges.shoulder_swing},
        {"shoulder_twist", c.ranges.shoulder_twist},
        {"elbow_flex", c.ranges.elbow_flex},
        {"spine", c.ranges.spine},
        {"clavicle", c.ranges.clavicle},
        {"neck", c.ranges.neck},
        {"hip", c.ranges.hip},
        {"overlap_min", c.ranges.overlap_min},
        {"overlap_max", c.ranges.overlap_max}}},
  };
}

}  // namespace

void write_config(const std::string& path, const PipelineConfig& config) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << config_json(config).dump(1) << '\n';
}

Scene build_scene(const PipelineConfig& config) {
  Scene s;
  s.mannequin = make_mannequin(config.mannequin);
  s.cloth = make_shirt(s.mannequin.capsules, config.shirt);
  s.rig = make_garment_rig(s.cloth, s.mannequin, config.scene_seed, config.wrinkles);
  s.cloth_edges = edge_list(s.cloth.mesh);
  return s;
}

Kdsm build_kdsm(const TriangleMesh& body, std::span<const Bone> bones, double dx, double h, double thicken_by,
                double eps_box) {
  Kdsm k;
  const ScalarGrid phi = build_level_set(body, dx, thicken_by + 3.0 * dx);
  k.phi = thicken(phi, thicken_by);
  k.mesh = build_lattice(k.phi, h > 0.0 ? h : dx);
  k.mesh.skin_weights = assign_weights(k.mesh.rest_vertices, bones);
  k.rest = std::make_unique<TetLocator>(k.mesh.rest_vertices, k.mesh.tets, eps_box);
  return k;
}

FrameResult process_frame(const FrameContext& ctx, const Pose& pose, int pose_id, bool overlap) {
  const Scene& scene = *ctx.scene;
  const Kdsm& kdsm = *ctx.kdsm;
  const PipelineConfig& cfg = *ctx.config;
  const auto& cloth_rest = scene.cloth.mesh.vertices;

  FrameResult r;
  r.pose_id = pose_id;
  r.overlap = overlap;
  const auto skinning = skinning_transforms(scene.mannequin.skeleton, pose);
  TetLocator posed(skin_vertices(kdsm.mesh.rest_vertices, kdsm.mesh.skin_weights, skinning), kdsm.mesh.tets,
                   cfg.eps_box);
  r.gt = gen_synthetic_gt(pose, scene.cloth, scene.rig, scene.mannequin.skeleton, pose_id).positions;
  const Backmap bm = backmap_ground_truth(r.gt, posed, kdsm.mesh.rest_vertices, {cfg.eps, cfg.fallback_radius});
  r.no_parent = bm.count_no_parent();
  r.multi_candidate = bm.count_multi();

  Method1Stats m1;
  r.fields[0] = method1(bm, cloth_rest, cfg.method1_seed, pose_id, &m1);
  const auto body_posed = skin_vertices(scene.mannequin.body.vertices, scene.mannequin.body_weights, skinning);
  r.fields[1] = (*ctx.uvn)(body_posed, r.gt, pose_id);
  HybridOptions hopt;
  hopt.tau = cfg.tau;
  r.fields[2] = hybrid(bm, r.fields[1], cloth_rest, scene.cloth_edges, hopt, &r.hybrid);

  const ReconstructOptions ropt{cfg.eps, cfg.fallback_radius};
  for (int m = 0; m < 3; ++m) {
    const auto rec = reconstruct(r.fields[static_cast<std::size_t>(m)], cloth_rest, *kdsm.rest,
                                 kdsm.mesh.skin_weights, skinning, ropt);
    if (m == 0) r.method1_clamped = rec.clamped.size();
    r.label_error[static_cast<std::size_t>(m)] = vertex_error(rec.positions, r.gt);
    r.label_volume_error[static_cast<std::size_t>(m)] =
        volume_error(rec.positions, r.gt, scene.cloth.mesh.triangles);
    r.delta_d[static_cast<std::size_t>(m)] = delta_d_stats(r.fields[static_cast<std::size_t>(m)], scene.cloth_edges);
  }
  return r;
}

Split split_dataset(std::size_t count, std::uint64_t seed) {
  std::vector<int> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = static_cast<int>(i);
  std::uint64_t state = seed;
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(splitmix(state) % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(count)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(count)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  s.val.assign(order.begin() + static_cast<long>(n_train), order.begin() + static_cast<long>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

namespace {

struct Evaluation {
  std::vector<double> errors;
  std::vector<double> volumes;
};

Evaluation evaluate(const Regressor& model, const std::vector<int>& ids, const std::vector<FrameResult>& frames,
                    const PoseSet& poses, const Scene& scene, const Kdsm& kdsm, const PipelineConfig& cfg) {
  Evaluation ev;
  const ReconstructOptions ropt{cfg.eps, cfg.fallback_radius};
  for (int id : ids) {
    const auto& pose = poses.poses[static_cast<std::size_t>(id)];
    const ClothImage img = model.infer(pose_feature(pose));
    const auto skinning = skinning_transforms(scene.mannequin.skeleton, pose);
    const auto rec = infer_cloth(img, scene.cloth, *kdsm.rest, kdsm.mesh.skin_weights, skinning, ropt);
    const auto& gt = frames[static_cast<std::size_t>(id)].gt;
    ev.errors.push_back(vertex_error(rec.positions, gt).avg);
    ev.volumes.push_back(volume_error(rec.positions, gt, scene.cloth.mesh.triangles));
  }
  return ev;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  if (cfg.threads > 0) set_num_threads(cfg.threads);
  if (cfg.num_poses < 10) throw StageError("config", "need at least 10 poses for an 80/10/10 split");
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);

  Scene scene;
  {
    StageTimer t("scene");
    scene = stage("scene", [&] { return build_scene(cfg); });
  }
  Kdsm kdsm;
  {
    StageTimer t("kdsm");
    kdsm = stage("tetmesh", [&] {
      return build_kdsm(scene.mannequin.body, scene.mannequin.bones, cfg.dx, cfg.h, cfg.thicken, cfg.eps_box);
    });
  }
  stage("embed", [&] { return embed_rest(scene.cloth.mesh.vertices, *kdsm.rest, cfg.eps); });
  const UvnTransfer uvn = stage("embed", [&] { return UvnTransfer(scene.mannequin.body, scene.cloth.mesh.vertices); });

  const PoseSet poses = sample_poses(scene.mannequin.skeleton, cfg.num_poses, cfg.pose_seed, cfg.overlap_every,
                                     cfg.ranges);
  write_poses((out_dir / "poses.json").string(), poses);
  const Split split = split_dataset(cfg.num_poses, cfg.split_seed);

  std::vector<FrameResult> frames;
  frames.reserve(cfg.num_poses);
  {
    StageTimer t("gen-data");
    const FrameContext ctx{&scene, &kdsm, &uvn, &cfg};
    for (std::size_t i = 0; i < cfg.num_poses; ++i) {
      frames.push_back(stage("gen-data", [&] {
        return process_frame(ctx, poses.poses[i], static_cast<int>(i), poses.overlap[i] != 0);
      }));
    }
  }

  if (cfg.save_fields != "none") {
    std::vector<int> ids;
    if (cfg.save_fields == "all") {
      for (std::size_t i = 0; i < frames.size(); ++i) ids.push_back(static_cast<int>(i));
    } else {
      ids = split.test;
    }
    for (int m = 0; m < 3; ++m) {
      const fs::path dir = out_dir / "fields" / kMethodNames[static_cast<std::size_t>(m)];
      fs::create_directories(dir);
      for (int id : ids) {
        write_displacement((dir / pose_file(id)).string(),
                           frames[static_cast<std::size_t>(id)].fields[static_cast<std::size_t>(m)]);
      }
    }
  }

  const ImageMask mask = coverage_mask(scene.cloth);
  write_mask((out_dir / "mask.bin").string(), mask);
  std::vector<Eigen::VectorXd> train_features;
  for (int id : split.train) train_features.push_back(pose_feature(poses.poses[static_cast<std::size_t>(id)]));

  PipelineResult result;
  auto train_for = [&](int m) {
    std::vector<ClothImage> images;
    images.reserve(split.train.size());
    for (int id : split.train) {
      images.push_back(rasterize(frames[static_cast<std::size_t>(id)].fields[static_cast<std::size_t>(m)], scene.cloth));
    }
    return images;
  };
  std::array<Evaluation, 3> test_eval;
  std::array<Evaluation, 3> val_eval;
  Evaluation baseline_eval;
  Evaluation baseline_val;
  {
    StageTimer t("train");
    for (int m = 0; m < 3; ++m) {
      const auto images = train_for(m);
      const Regressor model = stage("train", [&] { return Regressor::train(train_features, images, mask, cfg.lambda); });
      if (cfg.save_models) {
        fs::create_directories(out_dir / "models");
        model.save((out_dir / "models" / (std::string(kMethodNames[static_cast<std::size_t>(m)]) + ".model")).string());
      }
      test_eval[static_cast<std::size_t>(m)] =
          stage("infer", [&] { return evaluate(model, split.test, frames, poses, scene, kdsm, cfg); });
      val_eval[static_cast<std::size_t>(m)] =
          stage("infer", [&] { return evaluate(model, split.val, frames, poses, scene, kdsm, cfg); });
      if (m == 2) {
        const Regressor mean = Regressor::mean_baseline(train_features, images, mask);
        baseline_eval = stage("infer", [&] { return evaluate(mean, split.test, frames, poses, scene, kdsm, cfg); });
        baseline_val = stage("infer", [&] { return evaluate(mean, split.val, frames, poses, scene, kdsm, cfg); });
      }
    }
  }

  // Summaries, all recomputable from the per-example lists in the report.
  result.kdsm_vertices = kdsm.mesh.num_vertices();
  result.kdsm_tets = kdsm.mesh.num_tets();
  result.cloth_vertices = scene.cloth.num_vertices();
  result.frames = frames.size();
  for (const auto& f : frames) {
    result.overlap_frames += f.overlap ? 1 : 0;
    result.no_parent_total += f.no_parent;
    result.multi_candidate_total += f.multi_candidate;
  }
  json report;
  report["config"] = config_json(cfg);
  report["scene"] = {
      {"cloth_vertices", result.cloth_vertices},
      {"cloth_triangles", scene.cloth.mesh.num_triangles()},
      {"body_vertices", scene.mannequin.body.num_vertices()},
      {"body_triangles", scene.mannequin.body.num_triangles()},
      {"kdsm_vertices", result.kdsm_vertices},
      {"kdsm_tets", result.kdsm_tets},
      {"kdsm_volume", total_volume(kdsm.mesh)},
      {"cloth_hash", std::to_string(mesh_hash(scene.cloth.mesh))},
      {"body_hash", std::to_string(mesh_hash(scene.mannequin.body))},
      {"frames", result.frames},
      {"overlap_frames", result.overlap_frames},
      {"no_parent_vertices", result.no_parent_total},
      {"multi_candidate_vertices", result.multi_candidate_total},
  };
  report["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
  {
    std::ofstream out(out_dir / "split.json");
    out << report["split"].dump(1) << '\n';
  }

  json per_frame = json::array();
  for (const auto& f : frames) {
    json jf = {{"pose_id", f.pose_id},
               {"overlap", f.overlap},
               {"no_parent", f.no_parent},
               {"multi_candidate", f.multi_candidate},
               {"method1_clamped", f.method1_clamped},
               {"hybrid",
                {{"single", f.hybrid.single},
                 {"multi_valid", f.hybrid.multi_valid},
                 {"multi_invalid", f.hybrid.multi_invalid},
                 {"no_parent", f.hybrid.no_parent},
                 {"morph_rounds", f.hybrid.morph_rounds},
                 {"morph_validated", f.hybrid.morph_validated},
                 {"unvalidated", f.hybrid.unvalidated}}}};
    for (int m = 0; m < 3; ++m) {
      const auto mi = static_cast<std::size_t>(m);
      jf[kMethodNames[mi]] = {{"max_vertex_error", f.label_error[mi].max},
                              {"avg_vertex_error", f.label_error[mi].avg},
                              {"volume_error", f.label_volume_error[mi]},
                              {"max_delta_d", f.delta_d[mi].max},
                              {"avg_delta_d", f.delta_d[mi].avg}};
    }
    per_frame.push_back(jf);
  }
  report["frames"] = per_frame;

  auto summarize_eval = [](MethodSummary& s, const Evaluation& test, const Evaluation& val) {
    s.test_errors = test.errors;
    s.test_error = mean_std(test.errors);
    s.test_volume_error = mean_std(test.volumes);
    s.val_error = mean_std(val.errors);
  };
  json methods;
  for (int m = 0; m < 3; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    MethodSummary& s = result.methods[mi];
    s.name = kMethodNames[mi];
    std::vector<double> avg_err, vol, avg_dd, ov_dd, ov_err;
    for (const auto& f : frames) {
      avg_err.push_back(f.label_error[mi].avg);
      vol.push_back(f.label_volume_error[mi]);
      avg_dd.push_back(f.delta_d[mi].avg);
      s.label_max_error = std::max(s.label_max_error, f.label_error[mi].max);
      s.max_delta_d = std::max(s.max_delta_d, f.delta_d[mi].max);
      if (f.overlap) {
        ov_dd.push_back(f.delta_d[mi].avg);
        ov_err.push_back(f.label_error[mi].avg);
      }
    }
    s.label_avg_error = mean_std(avg_err);
    s.label_volume_error = mean_std(vol);
    s.avg_delta_d = mean_std(avg_dd);
    s.overlap_avg_delta_d = mean_std(ov_dd);
    s.overlap_label_avg_error = mean_std(ov_err);
    summarize_eval(s, test_eval[mi], val_eval[mi]);
    methods[s.name] = {{"labels",
                        {{"max_vertex_error", s.label_max_error},
                         {"avg_vertex_error", mean_std_json(s.label_avg_error)},
                         {"volume_error", mean_std_json(s.label_volume_error)},
                         {"max_delta_d", s.max_delta_d},
                         {"avg_delta_d", mean_std_json(s.avg_delta_d)},
                         {"overlap_avg_delta_d", mean_std_json(s.overlap_avg_delta_d)},
                         {"overlap_avg_vertex_error", mean_std_json(s.overlap_label_avg_error)}}},
                       {"trained",
                        {{"val_avg_vertex_error", mean_std_json(s.val_error)},
                         {"test_avg_vertex_error", mean_std_json(s.test_error)},
                         {"test_volume_error", mean_std_json(s.test_volume_error)},
                         {"test_errors", test_eval[mi].errors},
                         {"test_volume_errors", test_eval[mi].volumes}}}};
  }
  result.baseline.name = "mean_baseline";
  summarize_eval(result.baseline, baseline_eval, baseline_val);
  methods["mean_baseline"] = {{"trained",
                               {{"val_avg_vertex_error", mean_std_json(result.baseline.val_error)},
                                {"test_avg_vertex_error", mean_std_json(result.baseline.test_error)},
                                {"test_volume_error", mean_std_json(result.baseline.test_volume_error)},
                                {"test_errors", baseline_eval.errors},
                                {"test_volume_errors", baseline_eval.volumes}}}};
  report["methods"] = methods;

  result.report_path = (out_dir / "report.json").string();
  {
    std::ofstream out(result.report_path);
    if (!out) throw StageError("metrics", "cannot write " + result.report_path);
    out << report.dump(1) << '\n';
  }

  // Histogram of per-example test errors.
  {
    const int bins = std::max(1, cfg.histogram_bins);
    double hi = 0.0;
    for (const auto& s : result.methods) {
      for (double e : s.test_errors) hi = std::max(hi, e);
    }
    for (double e : result.baseline.test_errors) hi = std::max(hi, e);
    if (!(hi > 0.0)) hi = 1.0;
    std::ofstream out(out_dir / "histogram.csv");
    out << "bin_lo,bin_hi,method1,method2,hybrid,mean_baseline\n";
    std::vector<std::array<int, 4>> counts(static_cast<std::size_t>(bins), {0, 0, 0, 0});
    auto add = [&](int col, const std::vector<double>& errors) {
      for (double e : errors) {
        const int b = std::min(bins - 1, static_cast<int>(e / hi * bins));
        ++counts[static_cast<std::size_t>(b)][static_cast<std::size_t>(col)];
      }
    };
    for (int m = 0; m < 3; ++m) add(m, result.methods[static_cast<std::size_t>(m)].test_errors);
    add(3, result.baseline.test_errors);
    char buf[64];
    for (int b = 0; b < bins; ++b) {
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g", hi * b / bins, hi * (b + 1) / bins);
      const auto& c = counts[static_cast<std::size_t>(b)];
      out << buf << ',' << c[0] << ',' << c[1] << ',' << c[2] << ',' << c[3] << '\n';
    }
  }
  return result;
}

}  // namespace kdsm
