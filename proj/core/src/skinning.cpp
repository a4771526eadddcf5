#include "kdsm/skinning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace kdsm {

Affine Affine::inverse() const {
  const Eigen::Matrix3d Ri = R.inverse();
  return {Ri, -(Ri * t)};
}

int Skeleton::find(const std::string& name) const {
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (joints[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

void Skeleton::validate() const {
  if (joints.empty()) throw std::invalid_argument("skeleton has no joints");
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const int p = joints[j].parent;
    if (j == 0 && p != -1) throw std::invalid_argument("joint 0 must be the root");
    if (j > 0 && (p < 0 || p >= static_cast<int>(j))) {
      throw std::invalid_argument("joint " + joints[j].name + " is not topologically sorted");
    }
    if (std::abs(joints[j].rest.R.determinant()) < 1e-12) {
      throw std::invalid_argument("joint " + joints[j].name + " has a singular rest transform");
    }
  }
}

bool Pose::is_rest() const {
  if (!root_translation.isZero(0.0)) return false;
  return std::all_of(angles.begin(), angles.end(), [](const Vec3& a) { return a.isZero(0.0); });
}

Eigen::Matrix3d euler_rotation(const Vec3& a) {
  return (Eigen::AngleAxisd(a.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(a.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

double bend_angle(const Vec3& angles) {
  if (angles.isZero(0.0)) return 0.0;
  const double c = std::clamp((euler_rotation(angles).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

std::vector<Affine> skinning_transforms(const Skeleton& skeleton, const Pose& pose) {
  if (pose.angles.size() != skeleton.size()) {
    throw std::invalid_argument("pose joint count does not match skeleton");
  }
  std::vector<Affine> m(skeleton.size());
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    const Joint& joint = skeleton.joints[j];
    // Conjugated local rotation rest_j R_j rest_j^-1; kept exactly identity
    // for unrotated joints so the rest pose maps points to themselves.
    Affine local;
    if (!pose.angles[j].isZero(0.0)) {
      local = joint.rest * Affine{euler_rotation(pose.angles[j]), Vec3::Zero()} * joint.rest.inverse();
    }
    if (joint.parent < 0) {
      m[j] = pose.root_translation.isZero(0.0) ? local : Affine::translation(pose.root_translation) * local;
    } else {
      m[j] = m[static_cast<std::size_t>(joint.parent)] * local;
    }
  }
  return m;
}

std::vector<Affine> world_transforms(const Skeleton& skeleton, const Pose& pose) {
  auto m = skinning_transforms(skeleton, pose);
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = m[j] * skeleton.joints[j].rest;
  return m;
}

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

std::vector<JointWeight> normalize_influences(std::vector<JointWeight> weights) {
  std::sort(weights.begin(), weights.end(), [](const JointWeight& x, const JointWeight& y) { return x.joint < y.joint; });
  std::vector<JointWeight> merged;
  for (const auto& w : weights) {
    if (w.weight <= 0.0) continue;
    if (!merged.empty() && merged.back().joint == w.joint) {
      merged.back().weight += w.weight;
    } else {
      merged.push_back(w);
    }
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const JointWeight& x, const JointWeight& y) { return x.weight > y.weight; });
  if (merged.size() > kMaxInfluences) merged.resize(kMaxInfluences);
  double total = 0.0;
  for (const auto& w : merged) total += w.weight;
  if (total <= 0.0) return {};
  for (auto& w : merged) w.weight /= total;
  return merged;
}

SkinWeights assign_weights(std::span<const Vec3> vertices, std::span<const Bone> bones) {
  if (bones.empty()) throw std::invalid_argument("assign_weights needs at least one bone");
  constexpr double kOnBone = 1e-9;
  SkinWeights out;
  out.per_vertex.resize(vertices.size());
  std::vector<std::pair<double, int>> dist(bones.size());
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    for (std::size_t b = 0; b < bones.size(); ++b) {
      dist[b] = {segment_distance(vertices[v], bones[b].a, bones[b].b), static_cast<int>(b)};
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t n = std::min(kMaxInfluences, dist.size());
    std::vector<JointWeight> w;
    if (dist[0].first <= kOnBone) {
      for (std::size_t k = 0; k < n && dist[k].first <= kOnBone; ++k) {
        w.push_back({bones[static_cast<std::size_t>(dist[k].second)].joint, 1.0});
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        w.push_back({bones[static_cast<std::size_t>(dist[k].second)].joint, 1.0 / (dist[k].first * dist[k].first)});
      }
    }
    out.per_vertex[v] = normalize_influences(std::move(w));
  }
  return out;
}

std::vector<Vec3> skin_vertices(std::span<const Vec3> rest, const SkinWeights& weights,
                                std::span<const Affine> skinning) {
  if (weights.size() != rest.size()) throw std::invalid_argument("skin weights do not cover every vertex");
  std::vector<Vec3> out(rest.size());
  for (std::size_t v = 0; v < rest.size(); ++v) {
    Vec3 p = Vec3::Zero();
    for (const auto& jw : weights.per_vertex[v]) p += jw.weight * (skinning[static_cast<std::size_t>(jw.joint)] * rest[v]);
    out[v] = p;
  }
  return out;
}

std::vector<Vec3> skin_vertices(std::span<const Vec3> rest, const SkinWeights& weights, const Pose& pose,
                                const Skeleton& skeleton) {
  const auto m = skinning_transforms(skeleton, pose);
  return skin_vertices(rest, weights, m);
}

std::vector<Vec3> skin_subset(std::span<const Vec3> rest, const SkinWeights& weights,
                              std::span<const Affine> skinning, std::span<const int> ids) {
  std::vector<Vec3> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto v = static_cast<std::size_t>(ids[i]);
    Vec3 p = Vec3::Zero();
    for (const auto& jw : weights.per_vertex[v]) p += jw.weight * (skinning[static_cast<std::size_t>(jw.joint)] * rest[v]);
    out[i] = p;
  }
  return out;
}

}  // namespace kdsm
