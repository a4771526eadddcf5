#include "kdsm/tet_lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "kdsm/errors.hpp"

namespace kdsm {

std::size_t bcc_tet_count(int nx, int ny, int nz) {
  auto s = [](int v) { return static_cast<std::size_t>(std::max(v, 0)); };
  const std::size_t faces = s(nx - 1) * s(ny) * s(nz) + s(nx) * s(ny - 1) * s(nz) + s(nx) * s(ny) * s(nz - 1);
  return 4 * faces;
}

namespace {

struct Lattice {
  int nx, ny, nz;
  double h;
  Vec3 origin;

  int corner(int i, int j, int k) const { return (i * (ny + 1) + j) * (nz + 1) + k; }
  int center(int i, int j, int k) const { return (nx + 1) * (ny + 1) * (nz + 1) + (i * ny + j) * nz + k; }
  int num_nodes() const { return (nx + 1) * (ny + 1) * (nz + 1) + nx * ny * nz; }
  Vec3 position(int id) const {
    const int ncorner = (nx + 1) * (ny + 1) * (nz + 1);
    if (id < ncorner) {
      const int k = id % (nz + 1);
      const int j = (id / (nz + 1)) % (ny + 1);
      const int i = id / ((nz + 1) * (ny + 1));
      return origin + h * Vec3(i, j, k);
    }
    id -= ncorner;
    const int k = id % nz;
    const int j = (id / nz) % ny;
    const int i = id / (nz * ny);
    return origin + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
};

Tetrahedron oriented(int a, int b, int c, int d, const std::vector<Vec3>& pos) {
  Tetrahedron t{{a, b, c, d}};
  const TetVertices tv{pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)],
                       pos[static_cast<std::size_t>(c)], pos[static_cast<std::size_t>(d)]};
  if (signed_tet_volume(tv) < 0) std::swap(t.v[2], t.v[3]);
  return t;
}

}  // namespace

TetMesh build_lattice(const ScalarGrid& phi, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("lattice spacing must be positive");
  const Vec3 extent = phi.max_corner() - phi.origin;
  Lattice lat{};
  lat.h = h;
  lat.origin = phi.origin;
  // Floor with a small tolerance so h == dx reproduces the grid cells.
  lat.nx = static_cast<int>(std::floor(extent.x() / h + 1e-9));
  lat.ny = static_cast<int>(std::floor(extent.y() / h + 1e-9));
  lat.nz = static_cast<int>(std::floor(extent.z() / h + 1e-9));
  if (lat.nx < 1 || lat.ny < 1 || lat.nz < 1) throw EmptyMesh("grid too small for lattice spacing");

  const int nn = lat.num_nodes();
  std::vector<Vec3> pos(static_cast<std::size_t>(nn));
  std::vector<double> value(static_cast<std::size_t>(nn));
  for (int id = 0; id < nn; ++id) {
    pos[static_cast<std::size_t>(id)] = lat.position(id);
    // Lattice points lie inside the grid box by construction; clamp stray
    // rounding at the far faces.
    const Vec3 p = pos[static_cast<std::size_t>(id)].cwiseMin(phi.max_corner()).cwiseMax(phi.origin);
    value[static_cast<std::size_t>(id)] = sample(phi, p);
  }

  std::vector<Tetrahedron> kept;
  auto consider = [&](int ca, int cb, int e0, int e1) {
    const Tetrahedron t = oriented(ca, cb, e0, e1, pos);
    bool keep = false;
    Vec3 centroid = Vec3::Zero();
    for (int v : t.v) {
      keep = keep || value[static_cast<std::size_t>(v)] < 0.0;
      centroid += pos[static_cast<std::size_t>(v)];
    }
    if (!keep) {
      centroid /= 4.0;
      keep = sample(phi, centroid.cwiseMin(phi.max_corner()).cwiseMax(phi.origin)) < 0.0;
    }
    if (keep) kept.push_back(t);
  };
  // The four edges of a face, as corner-offset pairs in the face's two
  // tangential axes.
  constexpr int kEdges[4][4] = {{0, 0, 1, 0}, {1, 0, 1, 1}, {1, 1, 0, 1}, {0, 1, 0, 0}};
  for (int i = 0; i < lat.nx; ++i) {
    for (int j = 0; j < lat.ny; ++j) {
      for (int k = 0; k < lat.nz; ++k) {
        const int c = lat.center(i, j, k);
        if (i + 1 < lat.nx) {
          const int cn = lat.center(i + 1, j, k);
          for (const auto& e : kEdges) {
            consider(c, cn, lat.corner(i + 1, j + e[0], k + e[1]), lat.corner(i + 1, j + e[2], k + e[3]));
          }
        }
        if (j + 1 < lat.ny) {
          const int cn = lat.center(i, j + 1, k);
          for (const auto& e : kEdges) {
            consider(c, cn, lat.corner(i + e[0], j + 1, k + e[1]), lat.corner(i + e[2], j + 1, k + e[3]));
          }
        }
        if (k + 1 < lat.nz) {
          const int cn = lat.center(i, j, k + 1);
          for (const auto& e : kEdges) {
            consider(c, cn, lat.corner(i + e[0], j + e[1], k + 1), lat.corner(i + e[2], j + e[3], k + 1));
          }
        }
      }
    }
  }
  if (kept.empty()) throw EmptyMesh("thickened level set contains no lattice tetrahedra");

  std::vector<int> remap(static_cast<std::size_t>(nn), -1);
  for (const auto& t : kept) {
    for (int v : t.v) remap[static_cast<std::size_t>(v)] = 0;
  }
  TetMesh mesh;
  for (int id = 0; id < nn; ++id) {
    if (remap[static_cast<std::size_t>(id)] < 0) continue;
    remap[static_cast<std::size_t>(id)] = static_cast<int>(mesh.rest_vertices.size());
    mesh.rest_vertices.push_back(pos[static_cast<std::size_t>(id)]);
  }
  mesh.tets.reserve(kept.size());
  for (auto t : kept) {
    for (int& v : t.v) v = remap[static_cast<std::size_t>(v)];
    mesh.tets.push_back(t);
  }
  return mesh;
}

TetMesh red_refine(const TetMesh& mesh, std::span<const int> marked) {
  std::set<int> seen;
  for (int t : marked) {
    if (t < 0 || static_cast<std::size_t>(t) >= mesh.tets.size()) throw std::invalid_argument("marked tet out of range");
    if (!seen.insert(t).second) throw std::invalid_argument("tet marked twice");
  }
  TetMesh out;
  out.rest_vertices = mesh.rest_vertices;
  out.tets = mesh.tets;
  if (marked.empty()) {
    out.skin_weights = mesh.skin_weights;
    return out;
  }

  std::map<Edge, int> midpoint;
  auto mid = [&](int a, int b) {
    const Edge key{std::min(a, b), std::max(a, b)};
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(out.rest_vertices.size());
    out.rest_vertices.push_back(0.5 * (mesh.rest_vertices[static_cast<std::size_t>(a)] +
                                       mesh.rest_vertices[static_cast<std::size_t>(b)]));
    midpoint.emplace(key, id);
    return id;
  };

  for (int t : marked) {
    const auto [a, b, c, d] = mesh.tets[static_cast<std::size_t>(t)].v;
    const int ab = mid(a, b), ac = mid(a, c), ad = mid(a, d);
    const int bc = mid(b, c), bd = mid(b, d), cd = mid(c, d);
    std::vector<Tetrahedron> children;
    const auto& P = out.rest_vertices;
    children.push_back(oriented(a, ab, ac, ad, P));
    children.push_back(oriented(b, ab, bc, bd, P));
    children.push_back(oriented(c, ac, bc, cd, P));
    children.push_back(oriented(d, ad, bd, cd, P));
    // Octahedron: diagonal plus the ring of the remaining four midpoints.
    struct Split {
      int p, q;
      std::array<int, 4> ring;
    };
    const std::array<Split, 3> splits{Split{ab, cd, {ac, ad, bd, bc}}, Split{ac, bd, {ab, ad, cd, bc}},
                                      Split{ad, bc, {ab, ac, cd, bd}}};
    std::size_t best = 0;
    double best_len = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < splits.size(); ++s) {
      const double len = (P[static_cast<std::size_t>(splits[s].p)] - P[static_cast<std::size_t>(splits[s].q)]).squaredNorm();
      if (len < best_len) {
        best_len = len;
        best = s;
      }
    }
    const Split& s = splits[best];
    for (std::size_t r = 0; r < 4; ++r) {
      children.push_back(oriented(s.p, s.q, s.ring[r], s.ring[(r + 1) % 4], P));
    }
    out.tets[static_cast<std::size_t>(t)] = children[0];
    out.tets.insert(out.tets.end(), children.begin() + 1, children.end());
  }
  return out;
}

double total_volume(const TetMesh& mesh) {
  double v = 0.0;
  for (const auto& t : mesh.tets) v += signed_tet_volume(gather_tet(mesh.rest_vertices, t));
  return v;
}

void write_tetmesh(std::ostream& out, const TetMesh& mesh) {
  out << "kdsm-tet 1\n" << mesh.rest_vertices.size() << ' ' << mesh.tets.size() << '\n';
  char buf[128];
  for (const auto& v : mesh.rest_vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.tets) out << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.v[3] << '\n';
}

void write_tetmesh(const std::string& path, const TetMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_tetmesh(out, mesh);
}

TetMesh read_tetmesh(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "kdsm-tet" || version != 1) throw FormatError("not a kdsm-tet file");
  std::size_t nv = 0, nt = 0;
  if (!(in >> nv >> nt)) throw FormatError("missing tet mesh counts");
  TetMesh mesh;
  mesh.rest_vertices.resize(nv);
  for (auto& v : mesh.rest_vertices) {
    if (!(in >> v.x() >> v.y() >> v.z())) throw FormatError("truncated tet mesh vertices");
  }
  mesh.tets.resize(nt);
  for (auto& t : mesh.tets) {
    if (!(in >> t.v[0] >> t.v[1] >> t.v[2] >> t.v[3])) throw FormatError("truncated tet mesh indices");
    for (int v : t.v) {
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw FormatError("tet index out of range");
    }
  }
  return mesh;
}

TetMesh read_tetmesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_tetmesh(in);
}

}  // namespace kdsm
