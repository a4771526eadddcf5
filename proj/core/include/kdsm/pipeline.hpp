#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kdsm/displacement_model.hpp"
#include "kdsm/embedding.hpp"
#include "kdsm/errors.hpp"
#include "kdsm/level_set.hpp"
#include "kdsm/metrics.hpp"
#include "kdsm/synthetic.hpp"
#include "kdsm/tet_lattice.hpp"

namespace kdsm {

/// Failure inside one pipeline stage; what() is prefixed with the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::string output_dir = "kdsm_out";
  std::size_t num_poses = 500;
  std::uint64_t pose_seed = 1;
  std::uint64_t scene_seed = 7;
  std::uint64_t method1_seed = 11;
  std::uint64_t split_seed = 3;
  /// Every n-th pose drops both arms against the torso; 0 disables.
  int overlap_every = 5;
  double dx = 2.0;
  /// Lattice spacing; 0 means dx.
  double h = 0.0;
  double thicken = 8.0;
  double eps = kDefaultEps;
  double eps_box = kDefaultEpsBox;
  double fallback_radius = 20.0;
  double tau = 1.0;
  double lambda = 1e-3;
  /// Which label fields are written: "none", "test" or "all".
  std::string save_fields = "test";
  bool save_models = false;
  unsigned threads = 0;
  int histogram_bins = 20;
  MannequinOptions mannequin;
  ShirtOptions shirt;
  WrinkleOptions wrinkles;
  PoseRanges ranges;
};

PipelineConfig read_config(const std::string& path);
void write_config(const std::string& path, const PipelineConfig& config);

/// Body, garment and garment rig.
struct Scene {
  Mannequin mannequin;
  ClothMesh cloth;
  GarmentRig rig;
  std::vector<Edge> cloth_edges;
};

Scene build_scene(const PipelineConfig& config);

/// The skinned volumetric parameterization with its rest-space locator.
struct Kdsm {
  ScalarGrid phi;
  TetMesh mesh;
  std::unique_ptr<TetLocator> rest;
};

Kdsm build_kdsm(const TriangleMesh& body, std::span<const Bone> bones, double dx, double h, double thicken,
                double eps_box = kDefaultEpsBox);

enum class LabelMethod : int { kMethod1 = 0, kMethod2 = 1, kHybrid = 2 };
inline constexpr std::array<const char*, 3> kMethodNames = {"method1", "method2", "hybrid"};

struct FrameResult {
  int pose_id = 0;
  bool overlap = false;
  std::vector<Vec3> gt;
  std::array<DisplacementField, 3> fields;
  /// Label reconstruction error against the ground truth.
  std::array<MaxAvg, 3> label_error;
  std::array<MaxAvg, 3> delta_d;
  std::array<double, 3> label_volume_error{};
  std::size_t no_parent = 0;
  std::size_t multi_candidate = 0;
  std::size_t method1_clamped = 0;
  HybridStats hybrid;
};

/// Everything needed to turn one pose into labels.
struct FrameContext {
  const Scene* scene = nullptr;
  const Kdsm* kdsm = nullptr;
  const UvnTransfer* uvn = nullptr;
  const PipelineConfig* config = nullptr;
};

FrameResult process_frame(const FrameContext& ctx, const Pose& pose, int pose_id, bool overlap);

struct Split {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Seeded permutation cut 80/10/10.
Split split_dataset(std::size_t count, std::uint64_t seed);

struct MethodSummary {
  std::string name;
  MeanStd label_avg_error;
  double label_max_error = 0.0;
  MeanStd label_volume_error;
  MeanStd avg_delta_d;
  double max_delta_d = 0.0;
  /// Over constructed overlap frames only.
  MeanStd overlap_avg_delta_d;
  MeanStd overlap_label_avg_error;
  MeanStd val_error;
  MeanStd test_error;
  MeanStd test_volume_error;
  std::vector<double> test_errors;
};

struct PipelineResult {
  std::array<MethodSummary, 3> methods;
  MethodSummary baseline;
  std::size_t kdsm_vertices = 0;
  std::size_t kdsm_tets = 0;
  std::size_t cloth_vertices = 0;
  std::size_t frames = 0;
  std::size_t overlap_frames = 0;
  std::size_t no_parent_total = 0;
  std::size_t multi_candidate_total = 0;
  std::string report_path;
};

/// level set, lattice, skinning, labels, training and evaluation; writes
/// report.json, histogram.csv, poses.json and split.json into output_dir.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace kdsm
