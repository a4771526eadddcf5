#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kdsm/geometry.hpp"
#include "kdsm/point_location.hpp"
#include "kdsm/poisson_morph.hpp"
#include "kdsm/skinning.hpp"

namespace kdsm {

struct TetEmbedding {
  int tet = -1;
  BaryCoords bary;
};

/// Parent tet and barycentric weights per cloth vertex.
using Embedding = std::vector<TetEmbedding>;

/// Material-space plastic displacement d_i(theta) per cloth vertex (cm).
struct DisplacementField {
  int pose_id = 0;
  std::vector<Vec3> d;

  std::size_t size() const { return d.size(); }
};

struct GroundTruthFrame {
  int pose_id = 0;
  Pose pose;
  std::vector<Vec3> positions;
};

/// Embeds every cloth rest vertex into its deepest rest tet. Throws
/// NoParent(i) for the first vertex outside the lattice.
Embedding embed_rest(std::span<const Vec3> cloth_rest, const TetLocator& rest, double eps = kDefaultEps);

/// u_i = sum_k lambda_ik v_k for the given (deformed) vertex array.
std::vector<Vec3> skin_embedded(const Embedding& embedding, std::span<const Tetrahedron> tets,
                                std::span<const Vec3> deformed);

/// Same, skinning only the parent tets' vertices.
std::vector<Vec3> skin_embedded(const Embedding& embedding, std::span<const Tetrahedron> tets,
                                std::span<const Vec3> rest_vertices, const SkinWeights& weights,
                                std::span<const Affine> skinning);

struct BackmapCandidate {
  int tet = -1;
  BaryCoords bary;
  double min_weight = 0.0;
  /// sum_k lambda_k v_k^m: the material-space location this parent implies.
  Vec3 material = Vec3::Zero();
};

struct VertexBackmap {
  /// Pruned candidates, deepest first.
  std::vector<BackmapCandidate> candidates;
  /// Best tet by min weight when no tet contains the vertex within eps.
  std::optional<BackmapCandidate> nearest;
};

struct Backmap {
  std::vector<VertexBackmap> vertices;

  std::size_t count_no_parent() const;
  std::size_t count_multi() const;
};

struct BackmapOptions {
  double eps = kDefaultEps;
  /// Search radius (cm) for the nearest-tet fallback of escaped vertices.
  double fallback_radius = 20.0;
};

/// Locates each ground-truth vertex in the deformed KDSM and maps every
/// pruned candidate back to material space through the rest vertices.
Backmap backmap_ground_truth(std::span<const Vec3> gt_positions, const TetLocator& posed,
                             std::span<const Vec3> rest_vertices, const BackmapOptions& options = {});

struct Method1Stats {
  std::size_t multi_candidate = 0;
  std::size_t nearest_fallback = 0;
};

/// Uniform random choice among the pruned candidates of each vertex.
/// Candidates with all weights nonnegative are preferred when present so
/// the chosen material point lies inside its parent. Vertices without a
/// containing tet take the nearest candidate. Throws NoParent if neither
/// exists.
DisplacementField method1(const Backmap& backmap, std::span<const Vec3> cloth_rest, std::uint64_t seed,
                          int pose_id = 0, Method1Stats* stats = nullptr);

/// Closest body-surface point of a cloth vertex: triangle and barycentrics.
struct SurfaceAnchor {
  int triangle = -1;
  std::array<double, 3> bary{};
};

/// Orthonormal frame: columns are the UV tangent, its in-plane complement,
/// and the surface normal.
struct UvnFrame {
  Vec3 origin = Vec3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
};

/// Per-vertex UV tangents (dP/du averaged over incident triangles). The u
/// coordinate is treated as periodic: differences are wrapped into
/// [-0.5, 0.5).
std::vector<Vec3> uv_tangents(std::span<const Vec3> positions, std::span<const Triangle> triangles,
                              std::span<const Vec2> uv);

/// UVN offsets from the skinned body surface, re-applied in the T-pose.
/// Anchors and rest frames are computed once at construction.
class UvnTransfer {
 public:
  /// `body_rest` needs uv; throws DegenerateFrame at rank-deficient anchors.
  UvnTransfer(const TriangleMesh& body_rest, std::span<const Vec3> cloth_rest);

  /// d_i = anchor_rest + F_rest * F_posed^T (u_gt - anchor_posed) - u_i^{m_o}.
  DisplacementField operator()(std::span<const Vec3> body_posed, std::span<const Vec3> gt_positions,
                               int pose_id = 0) const;

  UvnFrame frame(std::span<const Vec3> positions, std::span<const Vec3> normals, std::span<const Vec3> tangents,
                 const SurfaceAnchor& anchor) const;

  const std::vector<SurfaceAnchor>& anchors() const { return anchors_; }
  const std::vector<UvnFrame>& rest_frames() const { return rest_frames_; }

 private:
  std::vector<Triangle> triangles_;
  std::vector<Vec2> uv_;
  std::vector<Vec3> cloth_rest_;
  std::vector<SurfaceAnchor> anchors_;
  std::vector<UvnFrame> rest_frames_;
};

struct HybridOptions {
  /// Agreement threshold with the UVN result, T-pose distance in cm.
  double tau = 1.0;
  MorphOptions morph;
};

struct HybridStats {
  std::size_t single = 0;
  std::size_t multi_valid = 0;
  std::size_t multi_invalid = 0;
  std::size_t no_parent = 0;
  std::size_t morph_rounds = 0;
  std::size_t morph_validated = 0;
  std::size_t unvalidated = 0;
};

/// Single-candidate vertices keep their exact value; multi-candidate ones
/// take the candidate closest to the UVN field if within tau. The rest is
/// filled by repeated Poisson morphs of the UVN field constrained at the
/// valid vertices, validating morphed values within tau each round.
DisplacementField hybrid(const Backmap& backmap, const DisplacementField& uvn_field,
                         std::span<const Vec3> cloth_rest, std::span<const Edge> edges,
                         const HybridOptions& options = {}, HybridStats* stats = nullptr);

/// Cloth positions from material-space points u^m: embed in the rest KDSM
/// (clamping to the nearest tet when outside) and skin the parents.
struct Reconstruction {
  std::vector<Vec3> positions;
  Embedding embedding;
  /// Vertices that needed the clamp fallback.
  std::vector<std::size_t> clamped;
  /// Vertices with no tet in range; their positions are left at u^m.
  std::vector<std::size_t> no_parent;
};

struct ReconstructOptions {
  double eps = kDefaultEps;
  double fallback_radius = 20.0;
};

Embedding embed_material_points(std::span<const Vec3> material, const TetLocator& rest,
                                const ReconstructOptions& options, std::vector<std::size_t>* clamped,
                                std::vector<std::size_t>* no_parent);

Reconstruction reconstruct(const DisplacementField& field, std::span<const Vec3> cloth_rest, const TetLocator& rest,
                           const SkinWeights& weights, std::span<const Affine> skinning,
                           const ReconstructOptions& options = {});

// Text format: "kdsm-disp 1\n<pose_id> <num_vertices>\n" then one
// "dx dy dz" line per vertex.
void write_displacement(std::ostream& out, const DisplacementField& field);
void write_displacement(const std::string& path, const DisplacementField& field);
DisplacementField read_displacement(std::istream& in);
DisplacementField read_displacement(const std::string& path);

}  // namespace kdsm
