#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kdsm/geometry.hpp"

namespace kdsm {

/// Rigid 3x4 transform x -> R x + t (cm).
struct Affine {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Vec3 t = Vec3::Zero();

  static Affine identity() { return {}; }
  static Affine translation(const Vec3& t) { return {Eigen::Matrix3d::Identity(), t}; }

  Vec3 operator*(const Vec3& x) const { return R * x + t; }
  Affine operator*(const Affine& o) const { return {R * o.R, R * o.t + t}; }
  /// General affine inverse (R need not be orthonormal).
  Affine inverse() const;
};

struct Joint {
  std::string name;
  int parent = -1;
  /// World transform of the joint frame in the rest (T-) pose.
  Affine rest;
};

/// Joints are topologically sorted: parent < own index.
struct Skeleton {
  std::vector<Joint> joints;

  std::size_t size() const { return joints.size(); }
  int find(const std::string& name) const;
  /// Throws std::invalid_argument if ordering or invertibility is violated.
  void validate() const;
};

/// Line segment influencing one joint, used for weight assignment.
struct Bone {
  int joint = 0;
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
};

/// Per-joint local rotations as (x, y, z) angles in radians, applied as
/// Rz * Ry * Rx in the joint's rest frame, plus a root translation.
struct Pose {
  std::vector<Vec3> angles;
  Vec3 root_translation = Vec3::Zero();

  static Pose rest(std::size_t num_joints) { return {std::vector<Vec3>(num_joints, Vec3::Zero()), Vec3::Zero()}; }
  bool is_rest() const;
};

Eigen::Matrix3d euler_rotation(const Vec3& angles);

/// Angle of the local rotation of a joint, in [0, pi].
double bend_angle(const Vec3& angles);

/// World transforms T_j(theta), composed parent to child.
std::vector<Affine> world_transforms(const Skeleton& skeleton, const Pose& pose);

/// T_j(theta) * rest_j^-1: maps rest-space points to posed space.
std::vector<Affine> skinning_transforms(const Skeleton& skeleton, const Pose& pose);

struct JointWeight {
  int joint = 0;
  double weight = 0.0;

  friend bool operator==(const JointWeight&, const JointWeight&) = default;
};

inline constexpr std::size_t kMaxInfluences = 4;

/// Sparse per-vertex weights: nonnegative, at most four entries, summing to 1.
struct SkinWeights {
  std::vector<std::vector<JointWeight>> per_vertex;

  std::size_t size() const { return per_vertex.size(); }
  bool empty() const { return per_vertex.empty(); }
};

/// Inverse-square distance to the nearest four bone segments, grouped by
/// joint and normalized. A vertex lying on bone segments gets its weight
/// split equally among exactly those bones.
SkinWeights assign_weights(std::span<const Vec3> vertices, std::span<const Bone> bones);

/// Merges, keeps the `kMaxInfluences` largest entries, and renormalizes.
std::vector<JointWeight> normalize_influences(std::vector<JointWeight> weights);

/// v_k(theta) = sum_j w_kj T_j(theta) v_k^j.
std::vector<Vec3> skin_vertices(std::span<const Vec3> rest, const SkinWeights& weights,
                                std::span<const Affine> skinning);
std::vector<Vec3> skin_vertices(std::span<const Vec3> rest, const SkinWeights& weights, const Pose& pose,
                                const Skeleton& skeleton);

/// Skins a subset of vertices; output[i] is vertex ids[i].
std::vector<Vec3> skin_subset(std::span<const Vec3> rest, const SkinWeights& weights,
                              std::span<const Affine> skinning, std::span<const int> ids);

}  // namespace kdsm
