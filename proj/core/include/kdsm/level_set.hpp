#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "kdsm/geometry.hpp"

namespace kdsm {

/// Node-centered scalar field on a Cartesian grid. Values are signed
/// distances in cm, negative inside the body. Storage is row-major over
/// (i, j, k) with k fastest.
struct ScalarGrid {
  Vec3 origin = Vec3::Zero();
  double dx = 1.0;
  std::array<int, 3> dims{2, 2, 2};
  std::vector<double> values;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(k);
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 node(int i, int j, int k) const { return origin + dx * Vec3(i, j, k); }
  Vec3 max_corner() const { return node(dims[0] - 1, dims[1] - 1, dims[2] - 1); }
  std::size_t num_nodes() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }
};

/// Signed distance of a closed, consistently oriented body mesh sampled on a
/// grid covering the mesh bounds inflated by `padding`.
///
/// Magnitudes are exact point-triangle distances. The sign comes from +x ray
/// crossing parity, counted separately for every connected component; a node
/// is inside when it is inside any component, so a body can be assembled from
/// overlapping closed parts. Throws OpenMeshError for non-closed input.
ScalarGrid build_level_set(const TriangleMesh& body, double dx, double padding);

/// values - c, same geometry.
ScalarGrid thicken(const ScalarGrid& grid, double c);

/// Trilinear interpolation; throws OutOfBounds outside the grid box.
double sample(const ScalarGrid& grid, const Vec3& p);

/// Parity test used for the sign; exposed for tests.
bool inside_closed_mesh(const TriangleMesh& body, const Vec3& p);

// Binary dump: one text line "origin_x origin_y origin_z dx nx ny nz\n"
// followed by nx*ny*nz little-endian doubles in storage order.
void write_grid(std::ostream& out, const ScalarGrid& grid);
void write_grid(const std::string& path, const ScalarGrid& grid);
ScalarGrid read_grid(std::istream& in);
ScalarGrid read_grid(const std::string& path);

}  // namespace kdsm
