#pragma once

#include <cstdint>
#include <vector>

#include "kdsm/embedding.hpp"
#include "kdsm/geometry.hpp"
#include "kdsm/skinning.hpp"

namespace kdsm {

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 1.0;
};

/// Closed capsule triangle mesh with a cylindrical uv chart: u is the
/// angle around the axis (periodic), v the normalized profile arc length.
TriangleMesh capsule_mesh(const Capsule& capsule, int segments, double ring_spacing);

struct MannequinOptions {
  int segments = 32;
  double ring_spacing = 2.0;
};

/// Procedural T-pose mannequin (y up, left arm along +x, cm): 15 joints,
/// a torso capsule and two capsules per arm, each its own closed component.
struct Mannequin {
  Skeleton skeleton;
  std::vector<Bone> bones;
  std::vector<Capsule> capsules;
  TriangleMesh body;
  SkinWeights body_weights;
};

Mannequin make_mannequin(const MannequinOptions& options = {});

/// Union of the capsules' +/- z extent above the point (x, y); 0 outside.
double body_depth(const std::vector<Capsule>& capsules, double x, double y);

struct ShirtOptions {
  double spacing = 4.0 / 3.0;
  int torso_half_cells = 12;
  int torso_cells_y = 45;
  int neck_half_cells = 5;
  int sleeve_cells_x = 12;
  int sleeve_cells_y = 12;
  /// Vertical clearance above the body (cm).
  double clearance = 2.0;
  /// Seam rounding: height is capped by rounding * sqrt(distance to seam).
  double rounding = 4.0;
};

/// Front and back panels sewn along the sides, under the sleeves and over
/// the shoulders. Open at hem, neck and both cuffs (four boundary loops).
/// uv is a front/back orthographic projection; seam vertices are front.
ClothMesh make_shirt(const std::vector<Capsule>& body, const ShirtOptions& options = {});

struct PoseRanges {
  double shoulder_down = 70.0;
  double shoulder_up = 30.0;
  double shoulder_swing = 30.0;
  double shoulder_twist = 20.0;
  double elbow_flex = 90.0;
  double spine = 15.0;
  double clavicle = 10.0;
  double neck = 15.0;
  double hip = 10.0;
  /// Constructed overlap poses drop both arms by this range (degrees).
  double overlap_min = 65.0;
  double overlap_max = 80.0;
};

struct PoseSet {
  std::vector<Pose> poses;
  /// Nonzero for constructed arm/torso overlap poses.
  std::vector<char> overlap;
};

/// Seeded per-joint uniform angles; every `overlap_every`-th pose (when
/// nonzero) is a constructed overlap pose.
PoseSet sample_poses(const Skeleton& skeleton, std::size_t count, std::uint64_t seed, int overlap_every = 5,
                     const PoseRanges& ranges = {});

struct WrinkleTerm {
  int joint = 0;
  double amplitude = 2.0;
  double sigma = 20.0;
  double wavenumber = 0.0;
  Vec2 direction = Vec2::UnitX();
  double phase = 0.0;
};

/// Garment skinning and wrinkle parameters used to synthesize ground truth.
struct GarmentRig {
  SkinWeights weights;
  std::vector<WrinkleTerm> wrinkles;
};

struct WrinkleOptions {
  double amplitude = 2.0;
  double sigma = 20.0;
  /// Wrinkle wavelength in cm, converted to uv units by `uv_per_cm`.
  double wavelength = 10.0;
  double uv_per_cm = 1.0 / 68.0;
  int smoothing_iterations = 10;
};

/// Cloth weights: the body's bone-distance weights evaluated at the cloth,
/// smoothed over the cloth graph, top four kept. Wrinkle terms at spine, chest, shoulders and elbows.
GarmentRig make_garment_rig(const ClothMesh& cloth, const Mannequin& mannequin, std::uint64_t seed,
                            const WrinkleOptions& options = {});

/// LBS with the garment weights plus sum over wrinkle joints of
/// A (1 - cos bend)/2 exp(-|x - p|^2 / 2 sigma^2) sin(k uv.q + phi) along the
/// posed normal. The rest pose returns the rest cloth exactly.
GroundTruthFrame gen_synthetic_gt(const Pose& pose, const ClothMesh& cloth, const GarmentRig& rig,
                                  const Skeleton& skeleton, int pose_id = 0);

}  // namespace kdsm
