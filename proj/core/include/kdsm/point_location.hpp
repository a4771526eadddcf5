#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kdsm/geometry.hpp"

namespace kdsm {

struct Aabb {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool overlaps(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
  bool contains(const Aabb& o) const {
    return (lo.array() <= o.lo.array()).all() && (o.hi.array() <= hi.array()).all();
  }
};

/// Bounding box hierarchy over tetrahedra, each boxed with an inflation of
/// `eps_box` cm. Median split over centroids along the widest axis; leaves
/// hold at most kLeafSize tets.
class TetBvh {
 public:
  static constexpr int kLeafSize = 4;

  struct Node {
    Aabb box;
    // Interior: children at left and left + 1... stored as explicit ids.
    int left = -1;
    int right = -1;
    // Leaf: range [begin, end) into the permuted tet order.
    int begin = 0;
    int end = 0;
    bool is_leaf() const { return left < 0; }
  };

  TetBvh() = default;
  TetBvh(std::span<const Vec3> vertices, std::span<const Tetrahedron> tets, double eps_box);

  /// Tets whose inflated box contains p, in ascending id order.
  std::vector<int> query(const Vec3& p) const;
  /// Tets whose inflated box overlaps the query box, ascending.
  std::vector<int> query(const Aabb& box) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<Aabb>& tet_boxes() const { return boxes_; }
  double eps_box() const { return eps_box_; }
  bool empty() const { return nodes_.empty(); }

 private:
  int build(int begin, int end, std::vector<Vec3>& centroids);

  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Aabb> boxes_;
  double eps_box_ = 0.0;
};

TetBvh build_bvh(std::span<const Vec3> vertices, std::span<const Tetrahedron> tets, double eps_box);

struct Candidate {
  int tet = -1;
  BaryCoords bary;
  double min_weight = 0.0;
};

using CandidateList = std::vector<Candidate>;

/// Default containment tolerance in barycentric units, and box inflation in cm.
inline constexpr double kDefaultEps = 1e-4;
inline constexpr double kDefaultEpsBox = 1e-3;

/// Strict ordering used everywhere: deeper (larger min weight) first, then
/// lower tet id.
bool candidate_before(const Candidate& a, const Candidate& b);

/// Candidate for tet `t`, or nullopt when the tet is degenerate.
std::optional<Candidate> evaluate_candidate(const Vec3& p, std::span<const Vec3> vertices,
                                            std::span<const Tetrahedron> tets, int t);

/// All non-degenerate tets with min barycentric weight >= -eps, sorted.
CandidateList candidate_tets(const Vec3& p, const TetBvh& bvh, std::span<const Vec3> vertices,
                             std::span<const Tetrahedron> tets, double eps = kDefaultEps);

/// Walks the sorted list; each kept entry removes every later entry sharing
/// a vertex with the face opposite its minimum-weight corner.
CandidateList prune_candidates(const CandidateList& list, std::span<const Tetrahedron> tets);

/// Deepest tet near p even when p lies outside every tet, searching boxes of
/// growing radius up to `max_radius` cm. nullopt if nothing is in range.
std::optional<Candidate> nearest_candidate(const Vec3& p, const TetBvh& bvh, std::span<const Vec3> vertices,
                                           std::span<const Tetrahedron> tets, double start_radius,
                                           double max_radius);

/// A deformed (or rest) tet mesh with its hierarchy. Owns the vertex
/// positions; the tet array must outlive the locator.
class TetLocator {
 public:
  TetLocator(std::vector<Vec3> vertices, std::span<const Tetrahedron> tets, double eps_box = kDefaultEpsBox);

  CandidateList candidates(const Vec3& p, double eps = kDefaultEps) const {
    return candidate_tets(p, bvh_, vertices_, tets_, eps);
  }
  CandidateList pruned(const Vec3& p, double eps = kDefaultEps) const {
    return prune_candidates(candidates(p, eps), tets_);
  }
  /// Best containing tet, else the nearest one by min weight (within
  /// `max_radius` cm).
  std::optional<Candidate> best_or_nearest(const Vec3& p, double eps, double max_radius) const;

  std::span<const Vec3> vertices() const { return vertices_; }
  std::span<const Tetrahedron> tets() const { return tets_; }
  const TetBvh& bvh() const { return bvh_; }
  /// Median tet bounding-box diagonal, a length scale for searches.
  double typical_size() const { return typical_size_; }

 private:
  std::vector<Vec3> vertices_;
  std::span<const Tetrahedron> tets_;
  TetBvh bvh_;
  double typical_size_ = 1.0;
};

/// Euclidean projection of barycentric weights onto the probability simplex.
BaryCoords project_to_simplex(const BaryCoords& b);

}  // namespace kdsm
