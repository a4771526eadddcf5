#pragma once

#include <map>
#include <span>
#include <vector>

#include "kdsm/geometry.hpp"

namespace kdsm {

/// Uniform graph Laplacian (degree on the diagonal, -1 per edge) in CSR form.
struct GraphLaplacian {
  std::vector<int> row_start;
  std::vector<int> col;
  std::vector<double> val;

  static GraphLaplacian from_edges(std::size_t num_vertices, std::span<const Edge> edges);
  std::size_t size() const { return row_start.empty() ? 0 : row_start.size() - 1; }
  Vec3 apply_row(std::size_t row, std::span<const Vec3> x) const;
};

struct MorphOptions {
  double relative_tolerance = 1e-10;
  /// Absolute cap on the infinity norm of the free-vertex residual (cm).
  double residual_tolerance = 1e-9;
  /// Iteration cap as a multiple of the vertex count.
  int max_iterations_per_vertex = 10;
};

struct MorphStats {
  int iterations = 0;
  double residual_inf = 0.0;
};

/// Solves L x = L s on the free vertices with x pinned to the Dirichlet
/// values, per coordinate, by Jacobi-preconditioned conjugate gradients.
/// Throws MorphSolveFailure when some connected component has no
/// constraint or the solve misses tolerance.
std::vector<Vec3> poisson_morph(std::size_t num_vertices, std::span<const Edge> edges, std::span<const Vec3> source,
                                const std::map<int, Vec3>& dirichlet, const MorphOptions& options = {},
                                MorphStats* stats = nullptr);

std::vector<Vec3> poisson_morph(const TriangleMesh& topology, std::span<const Vec3> source,
                                const std::map<int, Vec3>& dirichlet, const MorphOptions& options = {},
                                MorphStats* stats = nullptr);

}  // namespace kdsm
