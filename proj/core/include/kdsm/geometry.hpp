#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace kdsm {

/// Positions and displacements, in centimeters.
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Tetrahedra whose |signed volume| falls at or below this floor (cm^3) are
/// treated as degenerate and never used as embedding parents.
inline constexpr double kDegenerateVolume = 1e-12;

struct Tetrahedron {
  std::array<int, 4> v{};

  friend bool operator==(const Tetrahedron&, const Tetrahedron&) = default;
};

using Triangle = std::array<int, 3>;
using Edge = std::pair<int, int>;
using TetVertices = std::array<Vec3, 4>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  /// Optional per-vertex texture coordinates; empty when absent.
  std::vector<Vec2> uv;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  bool has_uv() const { return !uv.empty(); }
};

/// Which half of the front/back cloth image atlas a vertex is stored in.
enum class ClothSide : std::uint8_t { kFront = 0, kBack = 1 };

/// Garment mesh: rest (material space) positions, atlas uv, and side labels.
struct ClothMesh {
  TriangleMesh mesh;
  std::vector<ClothSide> side;

  std::size_t num_vertices() const { return mesh.vertices.size(); }
};

/// Barycentric weights of a point with respect to a tetrahedron.
///
/// The first weight is stored as 1 minus the sum of the other three, so
/// `sum()` (which adds in the same order) is exactly 1 for every point whose
/// weights lie in [0, 1].
struct BaryCoords {
  std::array<double, 4> w{1.0, 0.0, 0.0, 0.0};

  static BaryCoords from_last_three(double w1, double w2, double w3) {
    BaryCoords b;
    const double rest = (w1 + w2) + w3;
    b.w = {1.0 - rest, w1, w2, w3};
    return b;
  }

  double sum() const { return w[0] + ((w[1] + w[2]) + w[3]); }
  double operator[](int k) const { return w[static_cast<std::size_t>(k)]; }
  int argmin() const;
  double min() const { return w[static_cast<std::size_t>(argmin())]; }
};

double signed_tet_volume(const TetVertices& t);

/// Returns nullopt when the tetrahedron is degenerate.
std::optional<BaryCoords> try_barycentric_coords(const Vec3& p, const TetVertices& t);

/// Throws DegenerateTet when |volume| <= kDegenerateVolume.
BaryCoords barycentric_coords(const Vec3& p, const TetVertices& t);

Vec3 point_from_barycentric(const BaryCoords& b, const TetVertices& t);

template <typename Index>
TetVertices gather_tet(std::span<const Vec3> vertices, const std::array<Index, 4>& ids) {
  return {vertices[static_cast<std::size_t>(ids[0])], vertices[static_cast<std::size_t>(ids[1])],
          vertices[static_cast<std::size_t>(ids[2])], vertices[static_cast<std::size_t>(ids[3])]};
}

inline TetVertices gather_tet(std::span<const Vec3> vertices, const Tetrahedron& t) {
  return gather_tet(vertices, t.v);
}

/// Undirected edges (a < b), each once, sorted lexicographically.
std::vector<Edge> edge_list(const TriangleMesh& mesh);

/// Boundary loops as ordered vertex cycles, oriented so that each loop
/// follows the direction its edges have in the adjacent triangles.
/// Throws OpenMeshError if the boundary is not a union of simple cycles.
std::vector<std::vector<int>> boundary_loops(const TriangleMesh& mesh);

/// Closes every boundary loop with a fan around the loop centroid. The cap
/// triangles are oriented consistently with the mesh.
TriangleMesh cap_boundary_loops(const TriangleMesh& mesh);

/// Divergence-theorem volume. With `boundary_loops_capped` set the loops are
/// fanned closed first; otherwise the mesh is assumed closed.
double capped_mesh_volume(const TriangleMesh& mesh, bool boundary_loops_capped = true);

/// Area-weighted vertex normals (unit length, zero for isolated vertices).
std::vector<Vec3> vertex_normals(std::span<const Vec3> vertices, std::span<const Triangle> triangles);

/// Vertex adjacency lists derived from the edge list.
std::vector<std::vector<int>> vertex_neighbors(std::size_t num_vertices, std::span<const Edge> edges);

/// Connected component id per vertex (vertices not referenced by any edge
/// form singleton components).
std::vector<int> connected_components(std::size_t num_vertices, std::span<const Edge> edges,
                                      int* num_components = nullptr);

struct ClosestPoint {
  Vec3 point;
  /// Barycentric weights of `point` in the triangle.
  std::array<double, 3> bary;
  double distance_sq;
};

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// 64-bit FNV-1a over the raw bytes of the positions and index data.
std::uint64_t mesh_hash(const TriangleMesh& mesh);

}  // namespace kdsm
