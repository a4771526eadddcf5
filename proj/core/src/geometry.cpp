#include "kdsm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include <Eigen/Geometry>

#include "kdsm/errors.hpp"

namespace kdsm {

int BaryCoords::argmin() const {
  int best = 0;
  for (int k = 1; k < 4; ++k) {
    if (w[static_cast<std::size_t>(k)] < w[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

double signed_tet_volume(const TetVertices& t) {
  const Vec3 e1 = t[1] - t[0];
  const Vec3 e2 = t[2] - t[0];
  const Vec3 e3 = t[3] - t[0];
  return e1.dot(e2.cross(e3)) / 6.0;
}

std::optional<BaryCoords> try_barycentric_coords(const Vec3& p, const TetVertices& t) {
  const Vec3 e1 = t[1] - t[0];
  const Vec3 e2 = t[2] - t[0];
  const Vec3 e3 = t[3] - t[0];
  const Vec3 c23 = e2.cross(e3);
  const double det = e1.dot(c23);
  if (std::abs(det) / 6.0 <= kDegenerateVolume) return std::nullopt;
  // Cramer's rule on [e1 e2 e3] * (w1, w2, w3) = p - t0.
  const Vec3 r = p - t[0];
  const double inv = 1.0 / det;
  const double w1 = r.dot(c23) * inv;
  const double w2 = e1.dot(r.cross(e3)) * inv;
  const double w3 = e1.dot(e2.cross(r)) * inv;
  return BaryCoords::from_last_three(w1, w2, w3);
}

BaryCoords barycentric_coords(const Vec3& p, const TetVertices& t) {
  auto b = try_barycentric_coords(p, t);
  if (!b) throw DegenerateTet("tetrahedron volume below degeneracy floor");
  return *b;
}

Vec3 point_from_barycentric(const BaryCoords& b, const TetVertices& t) {
  return b.w[0] * t[0] + b.w[1] * t[1] + b.w[2] * t[2] + b.w[3] * t[3];
}

std::vector<Edge> edge_list(const TriangleMesh& mesh) {
  std::vector<Edge> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = tri[static_cast<std::size_t>(k)];
      int b = tri[static_cast<std::size_t>((k + 1) % 3)];
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<int>> boundary_loops(const TriangleMesh& mesh) {
  // Count directed half-edges; a boundary half-edge has no opposite twin.
  std::map<Edge, int> directed;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<std::size_t>(k)];
      const int b = tri[static_cast<std::size_t>((k + 1) % 3)];
      if (++directed[{a, b}] > 1) {
        throw OpenMeshError("half-edge used twice; mesh is non-manifold or inconsistently oriented");
      }
    }
  }
  std::map<int, int> next;
  for (const auto& [e, count] : directed) {
    if (directed.count({e.second, e.first})) continue;
    if (!next.emplace(e.first, e.second).second) {
      throw OpenMeshError("boundary vertex " + std::to_string(e.first) + " has two outgoing boundary edges");
    }
  }
  std::vector<std::vector<int>> loops;
  std::map<int, bool> visited;
  for (const auto& [start, _] : next) {
    if (visited[start]) continue;
    std::vector<int> loop;
    int v = start;
    while (!visited[v]) {
      visited[v] = true;
      loop.push_back(v);
      auto it = next.find(v);
      if (it == next.end()) throw OpenMeshError("boundary chain does not close");
      v = it->second;
    }
    if (v != start) throw OpenMeshError("boundary chain does not close into a simple cycle");
    if (loop.size() < 3) throw OpenMeshError("degenerate boundary loop");
    loops.push_back(std::move(loop));
  }
  return loops;
}

TriangleMesh cap_boundary_loops(const TriangleMesh& mesh) {
  TriangleMesh out;
  out.vertices = mesh.vertices;
  out.triangles = mesh.triangles;
  for (const auto& loop : boundary_loops(mesh)) {
    Vec3 centroid = Vec3::Zero();
    for (int v : loop) centroid += mesh.vertices[static_cast<std::size_t>(v)];
    centroid /= static_cast<double>(loop.size());
    const int c = static_cast<int>(out.vertices.size());
    out.vertices.push_back(centroid);
    // Boundary edge a->b lives in a mesh triangle, so the cap uses b->a.
    for (std::size_t k = 0; k < loop.size(); ++k) {
      const int a = loop[k];
      const int b = loop[(k + 1) % loop.size()];
      out.triangles.push_back({b, a, c});
    }
  }
  return out;
}

namespace {

double closed_volume(const TriangleMesh& mesh) {
  double vol = 0.0;
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    vol += a.dot(b.cross(c));
  }
  return vol / 6.0;
}

}  // namespace

double capped_mesh_volume(const TriangleMesh& mesh, bool boundary_loops_capped) {
  if (!boundary_loops_capped) return closed_volume(mesh);
  return closed_volume(cap_boundary_loops(mesh));
}

std::vector<Vec3> vertex_normals(std::span<const Vec3> vertices, std::span<const Triangle> triangles) {
  std::vector<Vec3> n(vertices.size(), Vec3::Zero());
  for (const auto& tri : triangles) {
    const Vec3& a = vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& b = vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& c = vertices[static_cast<std::size_t>(tri[2])];
    const Vec3 area2 = (b - a).cross(c - a);
    for (int v : tri) n[static_cast<std::size_t>(v)] += area2;
  }
  for (auto& v : n) {
    const double len = v.norm();
    if (len > 0.0) v /= len;
  }
  return n;
}

std::vector<std::vector<int>> vertex_neighbors(std::size_t num_vertices, std::span<const Edge> edges) {
  std::vector<std::vector<int>> adj(num_vertices);
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<int> connected_components(std::size_t num_vertices, std::span<const Edge> edges,
                                      int* num_components) {
  std::vector<int> parent(num_vertices);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const auto& [a, b] : edges) {
    const int ra = find(a);
    const int rb = find(b);
    if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
  }
  std::vector<int> label(num_vertices, -1);
  std::vector<int> root_label(num_vertices, -1);
  int count = 0;
  for (std::size_t v = 0; v < num_vertices; ++v) {
    const int r = find(static_cast<int>(v));
    if (root_label[static_cast<std::size_t>(r)] < 0) root_label[static_cast<std::size_t>(r)] = count++;
    label[v] = root_label[static_cast<std::size_t>(r)];
  }
  if (num_components) *num_components = count;
  return label;
}

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  auto make = [&](double u, double v, double w) {
    ClosestPoint cp;
    cp.bary = {u, v, w};
    cp.point = u * a + v * b + w * c;
    cp.distance_sq = (p - cp.point).squaredNorm();
    return cp;
  };
  if (d1 <= 0.0 && d2 <= 0.0) return make(1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return make(0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return make(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return make(0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return make(1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make(0, 1 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return make(1 - v - w, v, w);
}

namespace {

void fnv1a(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace

std::uint64_t mesh_hash(const TriangleMesh& mesh) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& v : mesh.vertices) fnv1a(h, v.data(), 3 * sizeof(double));
  for (const auto& t : mesh.triangles) fnv1a(h, t.data(), 3 * sizeof(int));
  for (const auto& uv : mesh.uv) fnv1a(h, uv.data(), 2 * sizeof(double));
  return h;
}

}  // namespace kdsm
