#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kdsm/geometry.hpp"
#include "kdsm/level_set.hpp"
#include "kdsm/skinning.hpp"

namespace kdsm {

/// The skinned volumetric parameterization. `rest_vertices` are the
/// material-space (T-pose) positions; skin weights are optional until the
/// skinning stage fills them.
struct TetMesh {
  std::vector<Vec3> rest_vertices;
  std::vector<Tetrahedron> tets;
  SkinWeights skin_weights;

  std::size_t num_vertices() const { return rest_vertices.size(); }
  std::size_t num_tets() const { return tets.size(); }
};

/// Body-centered cubic lattice of spacing h over the grid box. Every
/// interior cubic face yields four tetrahedra (the two adjacent cell centers
/// plus one face edge). A tet is kept when any of its vertices or its
/// centroid samples phi < 0. Unreferenced vertices are dropped, keeping the
/// original lattice order. Throws EmptyMesh when nothing is kept.
TetMesh build_lattice(const ScalarGrid& phi_thick, double h);

/// Number of lattice tets generated (before the keep test) for a block of
/// nx * ny * nz cells.
std::size_t bcc_tet_count(int nx, int ny, int nz);

/// 1:8 red subdivision through edge midpoints, shared midpoints created
/// once. Children replace their parent in place (first child) and are
/// appended (the other seven). The interior octahedron is split along its
/// shortest diagonal. Skin weights are cleared and must be reassigned.
TetMesh red_refine(const TetMesh& mesh, std::span<const int> marked);

double total_volume(const TetMesh& mesh);

// Text format:
//   kdsm-tet 1
//   <num_vertices> <num_tets>
//   x y z            (num_vertices lines)
//   a b c d          (num_tets lines, 0-based)
void write_tetmesh(std::ostream& out, const TetMesh& mesh);
void write_tetmesh(const std::string& path, const TetMesh& mesh);
TetMesh read_tetmesh(std::istream& in);
TetMesh read_tetmesh(const std::string& path);

}  // namespace kdsm
