#include "kdsm/level_set.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Geometry>

#include "kdsm/errors.hpp"
#include "kdsm/parallel.hpp"

namespace kdsm {

namespace {

struct Box {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double distance_sq(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - hi);
    return d.squaredNorm();
  }
};

struct Component {
  std::vector<int> triangles;
  Box box;
};

struct PreparedBody {
  const TriangleMesh* mesh = nullptr;
  std::vector<Component> components;
  std::vector<Box> tri_boxes;
};

void check_closed(const TriangleMesh& mesh) {
  std::map<Edge, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      if (a == b) throw OpenMeshError("degenerate triangle in body mesh");
      if (++directed[{a, b}] > 1) throw OpenMeshError("body mesh is not consistently oriented");
    }
  }
  for (const auto& [e, n] : directed) {
    if (!directed.count({e.second, e.first})) {
      throw OpenMeshError("body mesh has a boundary edge (" + std::to_string(e.first) + "," +
                          std::to_string(e.second) + "); sign cannot be determined");
    }
  }
}

PreparedBody prepare(const TriangleMesh& mesh) {
  check_closed(mesh);
  PreparedBody body;
  body.mesh = &mesh;
  int ncomp = 0;
  const auto label = connected_components(mesh.vertices.size(), edge_list(mesh), &ncomp);
  std::vector<int> remap(static_cast<std::size_t>(ncomp), -1);
  body.tri_boxes.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const int c = label[static_cast<std::size_t>(mesh.triangles[t][0])];
    if (remap[static_cast<std::size_t>(c)] < 0) {
      remap[static_cast<std::size_t>(c)] = static_cast<int>(body.components.size());
      body.components.emplace_back();
    }
    auto& comp = body.components[static_cast<std::size_t>(remap[static_cast<std::size_t>(c)])];
    comp.triangles.push_back(static_cast<int>(t));
    for (int v : mesh.triangles[t]) {
      comp.box.extend(mesh.vertices[static_cast<std::size_t>(v)]);
      body.tri_boxes[t].extend(mesh.vertices[static_cast<std::size_t>(v)]);
    }
  }
  return body;
}

enum class Hit { kMiss, kHit, kDegenerate };

// Exact-ish +x ray test in the yz projection. Edge-function zeros mean the
// ray grazes an edge or vertex and the parity would be ambiguous.
Hit ray_x_hit(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const double ay = a.y() - p.y(), az = a.z() - p.z();
  const double by = b.y() - p.y(), bz = b.z() - p.z();
  const double cy = c.y() - p.y(), cz = c.z() - p.z();
  const double e0 = by * cz - bz * cy;  // opposite a
  const double e1 = cy * az - cz * ay;  // opposite b
  const double e2 = ay * bz - az * by;  // opposite c
  const double area = e0 + e1 + e2;
  if (area == 0.0) return Hit::kMiss;  // triangle parallel to the ray
  if (e0 == 0.0 || e1 == 0.0 || e2 == 0.0) {
    // Only ambiguous when the other two share the sign of the area.
    const bool others_ok = (e0 == 0.0 || (e0 > 0) == (area > 0)) && (e1 == 0.0 || (e1 > 0) == (area > 0)) &&
                           (e2 == 0.0 || (e2 > 0) == (area > 0));
    return others_ok ? Hit::kDegenerate : Hit::kMiss;
  }
  if ((e0 > 0) != (area > 0) || (e1 > 0) != (area > 0) || (e2 > 0) != (area > 0)) return Hit::kMiss;
  const double x = (e0 * a.x() + e1 * b.x() + e2 * c.x()) / area;
  return x > p.x() ? Hit::kHit : Hit::kMiss;
}

// Möller-Trumbore along an arbitrary direction, used after a degenerate hit.
Hit ray_dir_hit(const Vec3& p, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  const double scale = e1.norm() * e2.norm();
  if (std::abs(det) <= 1e-14 * scale) return Hit::kMiss;
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = s.dot(h) * inv;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  const double w = 1.0 - u - v;
  constexpr double kTol = 1e-12;
  if (u < -kTol || v < -kTol || w < -kTol) return Hit::kMiss;
  if (u < kTol || v < kTol || w < kTol) return Hit::kDegenerate;
  const double t = e2.dot(q) * inv;
  return t > 0 ? Hit::kHit : Hit::kMiss;
}

bool inside_component(const PreparedBody& body, const Component& comp, const Vec3& p) {
  const Box& box = comp.box;
  if ((p.array() < box.lo.array()).any() || (p.array() > box.hi.array()).any()) return false;
  const auto& mesh = *body.mesh;
  bool degenerate = false;
  int crossings = 0;
  for (int t : comp.triangles) {
    const Box& tb = body.tri_boxes[static_cast<std::size_t>(t)];
    if (tb.hi.x() < p.x() || tb.lo.y() > p.y() || tb.hi.y() < p.y() || tb.lo.z() > p.z() || tb.hi.z() < p.z()) {
      continue;
    }
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Hit h = ray_x_hit(p, mesh.vertices[static_cast<std::size_t>(tri[0])],
                            mesh.vertices[static_cast<std::size_t>(tri[1])],
                            mesh.vertices[static_cast<std::size_t>(tri[2])]);
    if (h == Hit::kDegenerate) {
      degenerate = true;
      break;
    }
    if (h == Hit::kHit) ++crossings;
  }
  if (!degenerate) return (crossings & 1) != 0;

  // Deterministic jitter sequence of slightly tilted rays.
  for (int attempt = 1; attempt <= 16; ++attempt) {
    const double j1 = 1e-3 * (std::fmod(attempt * 0.6180339887498949, 1.0) - 0.5);
    const double j2 = 1e-3 * (std::fmod(attempt * 0.7548776662466927, 1.0) - 0.5);
    const Vec3 dir = Vec3(1.0, j1, j2).normalized();
    crossings = 0;
    degenerate = false;
    for (int t : comp.triangles) {
      const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
      const Hit h = ray_dir_hit(p, dir, mesh.vertices[static_cast<std::size_t>(tri[0])],
                                mesh.vertices[static_cast<std::size_t>(tri[1])],
                                mesh.vertices[static_cast<std::size_t>(tri[2])]);
      if (h == Hit::kDegenerate) {
        degenerate = true;
        break;
      }
      if (h == Hit::kHit) ++crossings;
    }
    if (!degenerate) return (crossings & 1) != 0;
  }
  throw OpenMeshError("ray parity could not be resolved at a grid node");
}

bool inside_any(const PreparedBody& body, const Vec3& p) {
  for (const auto& comp : body.components) {
    if (inside_component(body, comp, p)) return true;
  }
  return false;
}

double unsigned_distance(const PreparedBody& body, const Vec3& p) {
  const auto& mesh = *body.mesh;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& comp : body.components) {
    if (comp.box.distance_sq(p) >= best) continue;
    for (int t : comp.triangles) {
      if (body.tri_boxes[static_cast<std::size_t>(t)].distance_sq(p) >= best) continue;
      const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
      const auto cp = closest_point_on_triangle(p, mesh.vertices[static_cast<std::size_t>(tri[0])],
                                                mesh.vertices[static_cast<std::size_t>(tri[1])],
                                                mesh.vertices[static_cast<std::size_t>(tri[2])]);
      best = std::min(best, cp.distance_sq);
    }
  }
  return std::sqrt(best);
}

}  // namespace

bool inside_closed_mesh(const TriangleMesh& body, const Vec3& p) {
  const PreparedBody prepared = prepare(body);
  return inside_any(prepared, p);
}

ScalarGrid build_level_set(const TriangleMesh& body, double dx, double padding) {
  if (!(dx > 0.0)) throw std::invalid_argument("level set dx must be positive");
  if (body.vertices.empty()) throw OpenMeshError("empty body mesh");
  const PreparedBody prepared = prepare(body);

  Box bounds;
  for (const auto& v : body.vertices) bounds.extend(v);
  const Vec3 lo = bounds.lo - Vec3::Constant(padding);
  const Vec3 hi = bounds.hi + Vec3::Constant(padding);

  ScalarGrid grid;
  grid.origin = lo;
  grid.dx = dx;
  for (int a = 0; a < 3; ++a) {
    grid.dims[static_cast<std::size_t>(a)] = std::max(2, static_cast<int>(std::ceil((hi[a] - lo[a]) / dx)) + 1);
  }
  grid.values.assign(grid.num_nodes(), 0.0);

  const int nx = grid.dims[0];
  parallel_for(static_cast<std::size_t>(nx), [&](std::size_t i) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int k = 0; k < grid.dims[2]; ++k) {
        const Vec3 p = grid.node(static_cast<int>(i), j, k);
        const double d = unsigned_distance(prepared, p);
        // Nodes on the surface need no sign (and every ray from them grazes).
        if (d <= 1e-12) continue;
        grid.values[grid.index(static_cast<int>(i), j, k)] = inside_any(prepared, p) ? -d : d;
      }
    }
  });
  return grid;
}

ScalarGrid thicken(const ScalarGrid& grid, double c) {
  ScalarGrid out = grid;
  for (auto& v : out.values) v -= c;
  return out;
}

double sample(const ScalarGrid& grid, const Vec3& p) {
  const Vec3 g = (p - grid.origin) / grid.dx;
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const int n = grid.dims[static_cast<std::size_t>(a)];
    // Small tolerance so points on the far face are accepted.
    if (!(g[a] >= -1e-9) || !(g[a] <= (n - 1) + 1e-9)) {
      throw OutOfBounds("sample point outside level set grid");
    }
    const double clamped = std::clamp(g[a], 0.0, static_cast<double>(n - 1));
    int b = static_cast<int>(std::floor(clamped));
    if (b >= n - 1) b = n - 2;
    base[static_cast<std::size_t>(a)] = b;
    frac[static_cast<std::size_t>(a)] = clamped - b;
  }
  double result = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const double w = (di ? frac[0] : 1 - frac[0]) * (dj ? frac[1] : 1 - frac[1]) * (dk ? frac[2] : 1 - frac[2]);
    if (w == 0.0) continue;
    result += w * grid.at(base[0] + di, base[1] + dj, base[2] + dk);
  }
  return result;
}

void write_grid(std::ostream& out, const ScalarGrid& grid) {
  char header[256];
  std::snprintf(header, sizeof header, "%.17g %.17g %.17g %.17g %d %d %d\n", grid.origin.x(), grid.origin.y(),
                grid.origin.z(), grid.dx, grid.dims[0], grid.dims[1], grid.dims[2]);
  out << header;
  out.write(reinterpret_cast<const char*>(grid.values.data()),
            static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
}

void write_grid(const std::string& path, const ScalarGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_grid(out, grid);
}

ScalarGrid read_grid(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing grid header");
  std::istringstream hs(line);
  ScalarGrid grid;
  if (!(hs >> grid.origin.x() >> grid.origin.y() >> grid.origin.z() >> grid.dx >> grid.dims[0] >> grid.dims[1] >>
        grid.dims[2])) {
    throw FormatError("malformed grid header");
  }
  if (grid.dims[0] < 2 || grid.dims[1] < 2 || grid.dims[2] < 2 || !(grid.dx > 0)) {
    throw FormatError("invalid grid dimensions");
  }
  grid.values.resize(grid.num_nodes());
  in.read(reinterpret_cast<char*>(grid.values.data()),
          static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(grid.values.size() * sizeof(double))) {
    throw FormatError("truncated grid payload");
  }
  return grid;
}

ScalarGrid read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_grid(in);
}

}  // namespace kdsm
