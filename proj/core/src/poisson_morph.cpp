#include "kdsm/poisson_morph.hpp"

#include <algorithm>
#include <cmath>

#include "kdsm/errors.hpp"

namespace kdsm {

GraphLaplacian GraphLaplacian::from_edges(std::size_t n, std::span<const Edge> edges) {
  const auto adj = vertex_neighbors(n, edges);
  GraphLaplacian L;
  L.row_start.reserve(n + 1);
  L.row_start.push_back(0);
  for (std::size_t v = 0; v < n; ++v) {
    // Columns kept sorted with the diagonal in place.
    bool diag_done = false;
    for (int u : adj[v]) {
      if (!diag_done && u > static_cast<int>(v)) {
        L.col.push_back(static_cast<int>(v));
        L.val.push_back(static_cast<double>(adj[v].size()));
        diag_done = true;
      }
      L.col.push_back(u);
      L.val.push_back(-1.0);
    }
    if (!diag_done) {
      L.col.push_back(static_cast<int>(v));
      L.val.push_back(static_cast<double>(adj[v].size()));
    }
    L.row_start.push_back(static_cast<int>(L.col.size()));
  }
  return L;
}

Vec3 GraphLaplacian::apply_row(std::size_t row, std::span<const Vec3> x) const {
  Vec3 r = Vec3::Zero();
  for (int k = row_start[row]; k < row_start[row + 1]; ++k) {
    r += val[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
  }
  return r;
}

std::vector<Vec3> poisson_morph(std::size_t n, std::span<const Edge> edges, std::span<const Vec3> source,
                                const std::map<int, Vec3>& dirichlet, const MorphOptions& options,
                                MorphStats* stats) {
  if (source.size() != n) throw ShapeMismatch("morph source field size does not match the mesh");
  for (const auto& [v, _] : dirichlet) {
    if (v < 0 || static_cast<std::size_t>(v) >= n) throw std::out_of_range("Dirichlet vertex out of range");
  }

  int ncomp = 0;
  const auto comp = connected_components(n, edges, &ncomp);
  std::vector<char> constrained_comp(static_cast<std::size_t>(ncomp), 0);
  for (const auto& [v, _] : dirichlet) constrained_comp[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])] = 1;
  for (int c = 0; c < ncomp; ++c) {
    if (!constrained_comp[static_cast<std::size_t>(c)]) {
      throw MorphSolveFailure("connected component without Dirichlet constraint; morph is singular");
    }
  }

  const GraphLaplacian L = GraphLaplacian::from_edges(n, edges);
  std::vector<Vec3> x(source.begin(), source.end());
  std::vector<char> fixed(n, 0);
  for (const auto& [v, value] : dirichlet) {
    x[static_cast<std::size_t>(v)] = value;
    fixed[static_cast<std::size_t>(v)] = 1;
  }

  // Free unknowns, right-hand side b = (L s)_f - L_fc x_c, initial guess s.
  std::vector<int> free_ids;
  std::vector<int> slot(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (!fixed[v]) {
      slot[v] = static_cast<int>(free_ids.size());
      free_ids.push_back(static_cast<int>(v));
    }
  }
  const std::size_t m = free_ids.size();
  if (stats) *stats = {};
  if (m == 0) return x;

  std::vector<Vec3> b(m), diag_inv(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto v = static_cast<std::size_t>(free_ids[i]);
    Vec3 rhs = L.apply_row(v, source);
    double d = 0.0;
    for (int k = L.row_start[v]; k < L.row_start[v + 1]; ++k) {
      const int c = L.col[static_cast<std::size_t>(k)];
      if (c == static_cast<int>(v)) d = L.val[static_cast<std::size_t>(k)];
      if (fixed[static_cast<std::size_t>(c)]) rhs -= L.val[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(c)];
    }
    b[i] = rhs;
    diag_inv[i] = Vec3::Constant(1.0 / d);
  }

  // A y for free vectors y, treating fixed entries as zero.
  auto apply = [&](const std::vector<Vec3>& y, std::vector<Vec3>& out) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto v = static_cast<std::size_t>(free_ids[i]);
      Vec3 r = Vec3::Zero();
      for (int k = L.row_start[v]; k < L.row_start[v + 1]; ++k) {
        const int s = slot[static_cast<std::size_t>(L.col[static_cast<std::size_t>(k)])];
        if (s >= 0) r += L.val[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(s)];
      }
      out[i] = r;
    }
  };

  std::vector<Vec3> y(m), r(m), z(m), p(m), Ap(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = x[static_cast<std::size_t>(free_ids[i])];
  apply(y, Ap);
  Vec3 bnorm2 = Vec3::Zero();
  for (std::size_t i = 0; i < m; ++i) {
    r[i] = b[i] - Ap[i];
    z[i] = r[i].cwiseProduct(diag_inv[i]);
    p[i] = z[i];
    bnorm2 += b[i].cwiseAbs2();
  }
  // Three independent CG recurrences, one per coordinate, run in lockstep.
  Vec3 rz = Vec3::Zero();
  for (std::size_t i = 0; i < m; ++i) rz += r[i].cwiseProduct(z[i]);
  const Vec3 tol2 = (options.relative_tolerance * options.relative_tolerance) * bnorm2;
  const int max_iter = std::max(1, options.max_iterations_per_vertex * static_cast<int>(n));

  auto residual_inf = [&] {
    double worst = 0.0;
    for (const auto& ri : r) worst = std::max(worst, ri.cwiseAbs().maxCoeff());
    return worst;
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    Vec3 rnorm2 = Vec3::Zero();
    for (const auto& ri : r) rnorm2 += ri.cwiseAbs2();
    if ((rnorm2.array() <= tol2.array()).all() && residual_inf() <= options.residual_tolerance) break;
    apply(p, Ap);
    Vec3 pAp = Vec3::Zero();
    for (std::size_t i = 0; i < m; ++i) pAp += p[i].cwiseProduct(Ap[i]);
    Vec3 alpha;
    for (int c = 0; c < 3; ++c) alpha[c] = pAp[c] > 0 ? rz[c] / pAp[c] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      y[i] += alpha.cwiseProduct(p[i]);
      r[i] -= alpha.cwiseProduct(Ap[i]);
      z[i] = r[i].cwiseProduct(diag_inv[i]);
    }
    Vec3 rz_new = Vec3::Zero();
    for (std::size_t i = 0; i < m; ++i) rz_new += r[i].cwiseProduct(z[i]);
    Vec3 beta;
    for (int c = 0; c < 3; ++c) beta[c] = rz[c] > 0 ? rz_new[c] / rz[c] : 0.0;
    rz = rz_new;
    for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta.cwiseProduct(p[i]);
  }

  for (std::size_t i = 0; i < m; ++i) x[static_cast<std::size_t>(free_ids[i])] = y[i];

  // Recompute the true residual rather than trusting the recurrence.
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto v = static_cast<std::size_t>(free_ids[i]);
    worst = std::max(worst, (L.apply_row(v, x) - L.apply_row(v, source)).cwiseAbs().maxCoeff());
  }
  if (stats) *stats = {iter, worst};
  if (worst > 10.0 * options.residual_tolerance || !std::isfinite(worst)) {
    throw MorphSolveFailure("Poisson morph did not converge (residual " + std::to_string(worst) + ")");
  }
  return x;
}

std::vector<Vec3> poisson_morph(const TriangleMesh& topology, std::span<const Vec3> source,
                                const std::map<int, Vec3>& dirichlet, const MorphOptions& options,
                                MorphStats* stats) {
  const auto edges = edge_list(topology);
  return poisson_morph(topology.vertices.size(), edges, source, dirichlet, options, stats);
}

}  // namespace kdsm
