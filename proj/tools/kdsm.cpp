#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "kdsm/displacement_model.hpp"
#include "kdsm/embedding.hpp"
#include "kdsm/io.hpp"
#include "kdsm/level_set.hpp"
#include "kdsm/metrics.hpp"
#include "kdsm/obj_io.hpp"
#include "kdsm/parallel.hpp"
#include "kdsm/pipeline.hpp"
#include "kdsm/tet_lattice.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kdsm;

namespace {

PipelineConfig load_config(const std::string& path) { return path.empty() ? PipelineConfig{} : read_config(path); }

std::string frame_name(const char* prefix, int id, const char* ext) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%04d%s", prefix, id, ext);
  return buf;
}

const Pose& pick_pose(const PoseSet& set, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= set.poses.size()) {
    throw std::out_of_range("pose index " + std::to_string(index) + " out of range");
  }
  return set.poses[static_cast<std::size_t>(index)];
}

LabelMethod parse_method(const std::string& name) {
  for (std::size_t m = 0; m < kMethodNames.size(); ++m) {
    if (name == kMethodNames[m]) return static_cast<LabelMethod>(m);
  }
  throw std::invalid_argument("unknown method " + name);
}

void print_summary(const PipelineResult& r) {
  std::printf("kdsm %zu vertices, %zu tets; cloth %zu vertices; %zu frames (%zu overlap)\n", r.kdsm_vertices,
              r.kdsm_tets, r.cloth_vertices, r.frames, r.overlap_frames);
  std::printf("%-14s %10s %10s %10s %10s %12s %12s\n", "method", "label_avg", "label_max", "avg_dd", "ovl_dd",
              "test_avg", "test_vol");
  for (const auto& m : r.methods) {
    std::printf("%-14s %10.4g %10.4g %10.4g %10.4g %7.4f±%.3f %12.4g\n", m.name.c_str(), m.label_avg_error.mean,
                m.label_max_error, m.avg_delta_d.mean, m.overlap_avg_delta_d.mean, m.test_error.mean,
                m.test_error.std, m.test_volume_error.mean);
  }
  std::printf("%-14s %10s %10s %10s %10s %7.4f±%.3f %12.4g\n", r.baseline.name.c_str(), "-", "-", "-", "-",
              r.baseline.test_error.mean, r.baseline.test_error.std, r.baseline.test_volume_error.mean);
  std::printf("report: %s\n", r.report_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kdsm: skinned tetrahedral parameterization for learned cloth"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  // levelset
  auto* ls = app.add_subcommand("levelset", "Signed distance grid of a closed body mesh");
  std::string ls_body, ls_out, ls_config;
  double ls_dx = 2.0, ls_padding = -1.0;
  ls->add_option("--body", ls_body, "Body OBJ (default: the synthetic mannequin)");
  ls->add_option("--config", ls_config, "Pipeline config for the synthetic mannequin");
  ls->add_option("--dx", ls_dx, "Grid spacing (cm)")->capture_default_str();
  ls->add_option("--padding", ls_padding, "Box padding (cm); default thicken + 3 dx");
  ls->add_option("-o,--out", ls_out, "Output grid file")->required();

  // tetmesh
  auto* tm = app.add_subcommand("tetmesh", "BCC lattice of the thickened level set");
  std::string tm_grid, tm_out, tm_weights_out, tm_config;
  double tm_thicken = 8.0, tm_h = 0.0;
  int tm_refine = 0;
  tm->add_option("--grid", tm_grid, "Grid from levelset")->required();
  tm->add_option("--thicken", tm_thicken, "Thickening distance c (cm)")->capture_default_str();
  tm->add_option("--spacing", tm_h, "Lattice spacing (cm); 0 = grid dx")->capture_default_str();
  tm->add_option("--refine-all", tm_refine, "Red refinement passes over every tet")->capture_default_str();
  tm->add_option("--config", tm_config, "Pipeline config supplying the skeleton for weights");
  tm->add_option("--weights-out", tm_weights_out, "Also assign and write skinning weights (JSON)");
  tm->add_option("-o,--out", tm_out, "Output tet mesh")->required();

  // skin
  auto* sk = app.add_subcommand("skin", "Deform a tet mesh by linear blend skinning");
  std::string sk_mesh, sk_pose, sk_skeleton, sk_weights, sk_out;
  int sk_index = 0;
  sk->add_option("--mesh", sk_mesh, "Rest tet mesh")->required();
  sk->add_option("--pose", sk_pose, "Poses JSON")->required();
  sk->add_option("--index", sk_index, "Pose index")->capture_default_str();
  sk->add_option("--skeleton", sk_skeleton, "Skeleton JSON (default: synthetic mannequin)");
  sk->add_option("--weights", sk_weights, "Weights JSON (default: assigned from the skeleton's bones)");
  sk->add_option("-o,--out", sk_out, "Output deformed tet mesh")->required();

  // embed
  auto* em = app.add_subcommand("embed", "Barycentric embedding of cloth rest vertices");
  std::string em_mesh, em_cloth, em_out;
  double em_eps = kDefaultEps;
  em->add_option("--mesh", em_mesh, "Rest tet mesh")->required();
  em->add_option("--cloth", em_cloth, "Cloth OBJ")->required();
  em->add_option("--eps", em_eps, "Containment tolerance")->capture_default_str();
  em->add_option("-o,--out", em_out, "Output: one 'tet w0 w1 w2 w3' line per vertex")->required();

  // gen-data
  auto* gd = app.add_subcommand("gen-data", "Scene assets, ground truth and labels of all three methods");
  std::string gd_config, gd_out;
  gd->add_option("--config", gd_config, "Pipeline config JSON");
  gd->add_option("-o,--out", gd_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Fit the displacement regressor to one method's labels");
  std::string tr_config, tr_data, tr_method = "hybrid", tr_out;
  bool tr_mean = false;
  tr->add_option("--config", tr_config, "Pipeline config JSON");
  tr->add_option("--data", tr_data, "gen-data output directory")->required();
  tr->add_option("--method", tr_method, "method1, method2 or hybrid")->capture_default_str();
  tr->add_flag("--mean-baseline", tr_mean, "Fit the training-mean baseline instead");
  tr->add_option("-o,--out", tr_out, "Output model file")->required();

  // infer
  auto* in = app.add_subcommand("infer", "Predict cloth for a pose");
  std::string in_config, in_model, in_pose, in_out, in_image;
  int in_index = 0;
  in->add_option("--config", in_config, "Pipeline config JSON");
  in->add_option("--model", in_model, "Model from train")->required();
  in->add_option("--pose", in_pose, "Poses JSON")->required();
  in->add_option("--index", in_index, "Pose index")->capture_default_str();
  in->add_option("--image-out", in_image, "Also write the predicted displacement image");
  in->add_option("-o,--out", in_out, "Output cloth OBJ")->required();

  // metrics
  auto* mt = app.add_subcommand("metrics", "Vertex and volume error of a predicted cloth");
  std::string mt_pred, mt_gt, mt_field;
  mt->add_option("--pred", mt_pred, "Predicted cloth OBJ")->required();
  mt->add_option("--gt", mt_gt, "Ground-truth cloth OBJ")->required();
  mt->add_option("--field", mt_field, "Displacement field for edge variation stats");

  // run
  auto* rn = app.add_subcommand("run", "Whole pipeline: labels, training, evaluation, report");
  std::string rn_config, rn_out, rn_dump;
  std::size_t rn_poses = 0;
  rn->add_option("--config", rn_config, "Pipeline config JSON");
  rn->add_option("-o,--out", rn_out, "Output directory (overrides config)");
  rn->add_option("--poses", rn_poses, "Pose count (overrides config)");
  rn->add_option("--write-config", rn_dump, "Write the effective config and exit");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_num_threads(threads);

  try {
    if (*ls) {
      const PipelineConfig cfg = load_config(ls_config);
      const TriangleMesh body = ls_body.empty() ? make_mannequin(cfg.mannequin).body : read_obj(ls_body);
      const double pad = ls_padding >= 0.0 ? ls_padding : cfg.thicken + 3.0 * ls_dx;
      const ScalarGrid g = build_level_set(body, ls_dx, pad);
      write_grid(ls_out, g);
      std::printf("grid %d x %d x %d, dx %g\n", g.dims[0], g.dims[1], g.dims[2], g.dx);
    } else if (*tm) {
      TetMesh mesh = build_lattice(thicken(read_grid(tm_grid), tm_thicken), tm_h > 0.0 ? tm_h : read_grid(tm_grid).dx);
      for (int pass = 0; pass < tm_refine; ++pass) {
        std::vector<int> all(mesh.num_tets());
        for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<int>(t);
        mesh = red_refine(mesh, all);
      }
      if (!tm_weights_out.empty()) {
        const Mannequin m = make_mannequin(load_config(tm_config).mannequin);
        write_weights(tm_weights_out, assign_weights(mesh.rest_vertices, m.bones));
      }
      write_tetmesh(tm_out, mesh);
      std::printf("%zu vertices, %zu tets, volume %.6g\n", mesh.num_vertices(), mesh.num_tets(), total_volume(mesh));
    } else if (*sk) {
      TetMesh mesh = read_tetmesh(sk_mesh);
      Skeleton skel;
      std::vector<Bone> bones;
      if (sk_skeleton.empty()) {
        Mannequin m = make_mannequin();
        skel = std::move(m.skeleton);
        bones = std::move(m.bones);
      } else {
        skel = read_skeleton(sk_skeleton, &bones);
      }
      const SkinWeights w = sk_weights.empty() ? assign_weights(mesh.rest_vertices, bones) : read_weights(sk_weights);
      const PoseSet set = read_poses(sk_pose);
      const Pose& pose = pick_pose(set, sk_index);
      mesh.rest_vertices = skin_vertices(mesh.rest_vertices, w, pose, skel);
      write_tetmesh(sk_out, mesh);
    } else if (*em) {
      const TetMesh mesh = read_tetmesh(em_mesh);
      const TriangleMesh cloth = read_obj(em_cloth);
      const TetLocator rest(mesh.rest_vertices, mesh.tets);
      const Embedding e = embed_rest(cloth.vertices, rest, em_eps);
      std::ofstream out(em_out);
      out.precision(17);
      for (const auto& v : e) {
        out << v.tet << ' ' << v.bary[0] << ' ' << v.bary[1] << ' ' << v.bary[2] << ' ' << v.bary[3] << '\n';
      }
    } else if (*gd) {
      const PipelineConfig cfg = load_config(gd_config);
      const fs::path dir(gd_out);
      fs::create_directories(dir / "gt");
      const Scene scene = build_scene(cfg);
      const Kdsm kdsm = build_kdsm(scene.mannequin.body, scene.mannequin.bones, cfg.dx, cfg.h, cfg.thicken, cfg.eps_box);
      const UvnTransfer uvn(scene.mannequin.body, scene.cloth.mesh.vertices);
      embed_rest(scene.cloth.mesh.vertices, *kdsm.rest, cfg.eps);
      write_obj((dir / "body.obj").string(), scene.mannequin.body);
      write_cloth_obj((dir / "shirt.obj").string(), scene.cloth);
      write_skeleton((dir / "skeleton.json").string(), scene.mannequin.skeleton, scene.mannequin.bones);
      write_tetmesh((dir / "kdsm.tet").string(), kdsm.mesh);
      write_weights((dir / "kdsm_weights.json").string(), kdsm.mesh.skin_weights);
      write_config((dir / "config.json").string(), cfg);
      const PoseSet poses = sample_poses(scene.mannequin.skeleton, cfg.num_poses, cfg.pose_seed, cfg.overlap_every,
                                         cfg.ranges);
      write_poses((dir / "poses.json").string(), poses);
      for (const char* m : kMethodNames) fs::create_directories(dir / "fields" / m);
      const FrameContext ctx{&scene, &kdsm, &uvn, &cfg};
      json summary = json::array();
      for (std::size_t i = 0; i < poses.poses.size(); ++i) {
        const int id = static_cast<int>(i);
        const FrameResult f = process_frame(ctx, poses.poses[i], id, poses.overlap[i] != 0);
        TriangleMesh gt = scene.cloth.mesh;
        gt.vertices = f.gt;
        write_obj((dir / "gt" / frame_name("pose", id, ".obj")).string(), gt, &scene.cloth.side);
        json jf = {{"pose_id", id}, {"no_parent", f.no_parent}, {"multi_candidate", f.multi_candidate}};
        for (std::size_t m = 0; m < 3; ++m) {
          write_displacement((dir / "fields" / kMethodNames[m] / frame_name("pose", id, ".disp")).string(), f.fields[m]);
          jf[kMethodNames[m]] = {{"avg_vertex_error", f.label_error[m].avg}, {"avg_delta_d", f.delta_d[m].avg}};
        }
        summary.push_back(jf);
      }
      std::ofstream(dir / "labels.json") << summary.dump(1) << '\n';
      std::printf("%zu frames written to %s\n", poses.poses.size(), gd_out.c_str());
    } else if (*tr) {
      const PipelineConfig cfg = load_config(tr_config);
      const fs::path dir(tr_data);
      const Scene scene = build_scene(cfg);
      const PoseSet poses = read_poses((dir / "poses.json").string());
      const Split split = split_dataset(poses.poses.size(), cfg.split_seed);
      const auto method = static_cast<std::size_t>(parse_method(tr_method));
      std::vector<Eigen::VectorXd> features;
      std::vector<ClothImage> images;
      for (int id : split.train) {
        features.push_back(pose_feature(poses.poses[static_cast<std::size_t>(id)]));
        images.push_back(rasterize(
            read_displacement((dir / "fields" / kMethodNames[method] / frame_name("pose", id, ".disp")).string()),
            scene.cloth));
      }
      const ImageMask mask = coverage_mask(scene.cloth);
      const Regressor model = tr_mean ? Regressor::mean_baseline(features, images, mask)
                                      : Regressor::train(features, images, mask, cfg.lambda);
      model.save(tr_out);
      std::printf("%s model: %zu features -> %zu outputs from %zu poses\n", model.kind().c_str(),
                  model.feature_size(), model.output_size(), features.size());
    } else if (*in) {
      const PipelineConfig cfg = load_config(in_config);
      const Scene scene = build_scene(cfg);
      const Kdsm kdsm = build_kdsm(scene.mannequin.body, scene.mannequin.bones, cfg.dx, cfg.h, cfg.thicken, cfg.eps_box);
      const Regressor model = Regressor::load(in_model);
      const PoseSet set = read_poses(in_pose);
      const Pose& pose = pick_pose(set, in_index);
      const ClothImage img = model.infer(pose_feature(pose));
      if (!in_image.empty()) write_image(in_image, img);
      const auto rec = infer_cloth(img, scene.cloth, *kdsm.rest, kdsm.mesh.skin_weights,
                                   skinning_transforms(scene.mannequin.skeleton, pose), {cfg.eps, cfg.fallback_radius});
      TriangleMesh out = scene.cloth.mesh;
      out.vertices = rec.positions;
      write_obj(in_out, out, &scene.cloth.side);
      std::printf("%zu vertices, %zu clamped\n", out.num_vertices(), rec.clamped.size());
    } else if (*mt) {
      const TriangleMesh pred = read_obj(mt_pred);
      const TriangleMesh gt = read_obj(mt_gt);
      if (pred.triangles != gt.triangles) throw ShapeMismatch("predicted and ground-truth topology differ");
      const MaxAvg e = vertex_error(pred.vertices, gt.vertices);
      json j = {{"max_vertex_error", e.max},
                {"avg_vertex_error", e.avg},
                {"volume_error", volume_error(pred.vertices, gt.vertices, gt.triangles)}};
      if (!mt_field.empty()) {
        const MaxAvg dd = delta_d_stats(read_displacement(mt_field), edge_list(gt));
        j["max_delta_d"] = dd.max;
        j["avg_delta_d"] = dd.avg;
      }
      std::cout << j.dump(1) << '\n';
    } else if (*rn) {
      PipelineConfig cfg = load_config(rn_config);
      if (!rn_out.empty()) cfg.output_dir = rn_out;
      if (rn_poses > 0) cfg.num_poses = rn_poses;
      if (threads > 0) cfg.threads = threads;
      if (!rn_dump.empty()) {
        write_config(rn_dump, cfg);
        return 0;
      }
      print_summary(run_pipeline(cfg));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kdsm: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
