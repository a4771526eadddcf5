#include "kdsm/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Geometry>

#include "kdsm/errors.hpp"
#include "kdsm/parallel.hpp"

namespace kdsm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec3 interpolate(std::span<const Vec3> values, const Tetrahedron& t, const BaryCoords& b) {
  return point_from_barycentric(b, gather_tet(values, t));
}

BackmapCandidate to_backmap(const Candidate& c, std::span<const Tetrahedron> tets, std::span<const Vec3> rest) {
  return {c.tet, c.bary, c.min_weight, interpolate(rest, tets[static_cast<std::size_t>(c.tet)], c.bary)};
}

}  // namespace

Embedding embed_rest(std::span<const Vec3> cloth_rest, const TetLocator& rest, double eps) {
  Embedding out(cloth_rest.size());
  std::vector<char> missing(cloth_rest.size(), 0);
  parallel_for(cloth_rest.size(), [&](std::size_t i) {
    const auto list = rest.candidates(cloth_rest[i], eps);
    if (list.empty()) {
      missing[i] = 1;
      return;
    }
    out[i] = {list.front().tet, list.front().bary};
  });
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (missing[i]) throw NoParent(i);
  }
  return out;
}

std::vector<Vec3> skin_embedded(const Embedding& embedding, std::span<const Tetrahedron> tets,
                                std::span<const Vec3> deformed) {
  std::vector<Vec3> out(embedding.size());
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    out[i] = interpolate(deformed, tets[static_cast<std::size_t>(embedding[i].tet)], embedding[i].bary);
  }
  return out;
}

std::vector<Vec3> skin_embedded(const Embedding& embedding, std::span<const Tetrahedron> tets,
                                std::span<const Vec3> rest_vertices, const SkinWeights& weights,
                                std::span<const Affine> skinning) {
  std::vector<int> slot(rest_vertices.size(), -1);
  std::vector<int> ids;
  for (const auto& e : embedding) {
    for (int v : tets[static_cast<std::size_t>(e.tet)].v) {
      int& s = slot[static_cast<std::size_t>(v)];
      if (s < 0) {
        s = static_cast<int>(ids.size());
        ids.push_back(v);
      }
    }
  }
  const auto posed = skin_subset(rest_vertices, weights, skinning, ids);
  std::vector<Vec3> out(embedding.size());
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    TetVertices tv;
    const auto& t = tets[static_cast<std::size_t>(embedding[i].tet)];
    for (int k = 0; k < 4; ++k) {
      tv[static_cast<std::size_t>(k)] = posed[static_cast<std::size_t>(slot[static_cast<std::size_t>(t.v[static_cast<std::size_t>(k)])])];
    }
    out[i] = point_from_barycentric(embedding[i].bary, tv);
  }
  return out;
}

std::size_t Backmap::count_no_parent() const {
  return static_cast<std::size_t>(
      std::count_if(vertices.begin(), vertices.end(), [](const VertexBackmap& v) { return v.candidates.empty(); }));
}

std::size_t Backmap::count_multi() const {
  return static_cast<std::size_t>(
      std::count_if(vertices.begin(), vertices.end(), [](const VertexBackmap& v) { return v.candidates.size() > 1; }));
}

Backmap backmap_ground_truth(std::span<const Vec3> gt_positions, const TetLocator& posed,
                             std::span<const Vec3> rest_vertices, const BackmapOptions& options) {
  if (rest_vertices.size() != posed.vertices().size()) {
    throw ShapeMismatch("rest and posed KDSM vertex counts differ");
  }
  Backmap out;
  out.vertices.resize(gt_positions.size());
  const auto tets = posed.tets();
  parallel_for(gt_positions.size(), [&](std::size_t i) {
    auto& vb = out.vertices[i];
    for (const auto& c : posed.pruned(gt_positions[i], options.eps)) {
      vb.candidates.push_back(to_backmap(c, tets, rest_vertices));
    }
    if (vb.candidates.empty()) {
      const auto near = nearest_candidate(gt_positions[i], posed.bvh(), posed.vertices(), tets,
                                          posed.typical_size(), options.fallback_radius);
      if (near) vb.nearest = to_backmap(*near, tets, rest_vertices);
    }
  });
  return out;
}

DisplacementField method1(const Backmap& backmap, std::span<const Vec3> cloth_rest, std::uint64_t seed,
                          int pose_id, Method1Stats* stats) {
  if (backmap.vertices.size() != cloth_rest.size()) throw ShapeMismatch("backmap and cloth sizes differ");
  DisplacementField field;
  field.pose_id = pose_id;
  field.d.resize(cloth_rest.size());
  Method1Stats local;
  const std::uint64_t frame_key = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(pose_id)));
  for (std::size_t i = 0; i < cloth_rest.size(); ++i) {
    const auto& vb = backmap.vertices[i];
    const BackmapCandidate* chosen = nullptr;
    if (vb.candidates.empty()) {
      if (!vb.nearest) throw NoParent(i);
      chosen = &*vb.nearest;
      ++local.nearest_fallback;
    } else if (vb.candidates.size() == 1) {
      chosen = &vb.candidates.front();
    } else {
      ++local.multi_candidate;
      // Sorted deepest first, so the containing candidates form a prefix.
      std::size_t pool = 0;
      while (pool < vb.candidates.size() && vb.candidates[pool].min_weight >= 0.0) ++pool;
      if (pool == 0) pool = vb.candidates.size();
      const std::uint64_t r = splitmix64(frame_key ^ splitmix64(i));
      chosen = &vb.candidates[static_cast<std::size_t>(r % pool)];
    }
    field.d[i] = chosen->material - cloth_rest[i];
  }
  if (stats) *stats = local;
  return field;
}

std::vector<Vec3> uv_tangents(std::span<const Vec3> positions, std::span<const Triangle> triangles,
                              std::span<const Vec2> uv) {
  if (uv.size() != positions.size()) throw ShapeMismatch("uv count differs from vertex count");
  auto wrap = [](double du) { return du - std::floor(du + 0.5); };
  std::vector<Vec3> t(positions.size(), Vec3::Zero());
  for (const auto& tri : triangles) {
    const auto i0 = static_cast<std::size_t>(tri[0]);
    const auto i1 = static_cast<std::size_t>(tri[1]);
    const auto i2 = static_cast<std::size_t>(tri[2]);
    const Vec3 e1 = positions[i1] - positions[i0];
    const Vec3 e2 = positions[i2] - positions[i0];
    const double du1 = wrap(uv[i1].x() - uv[i0].x());
    const double du2 = wrap(uv[i2].x() - uv[i0].x());
    const double dv1 = uv[i1].y() - uv[i0].y();
    const double dv2 = uv[i2].y() - uv[i0].y();
    const double det = du1 * dv2 - du2 * dv1;
    if (std::abs(det) < 1e-300) continue;
    const Vec3 dpdu = (e1 * dv2 - e2 * dv1) / det;
    const double area = 0.5 * e1.cross(e2).norm();
    for (auto v : {i0, i1, i2}) t[v] += area * dpdu;
  }
  return t;
}

namespace {

SurfaceAnchor closest_anchor(const Vec3& p, std::span<const Vec3> verts, std::span<const Triangle> tris) {
  SurfaceAnchor best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < tris.size(); ++f) {
    const auto& tri = tris[f];
    const auto cp = closest_point_on_triangle(p, verts[static_cast<std::size_t>(tri[0])],
                                              verts[static_cast<std::size_t>(tri[1])],
                                              verts[static_cast<std::size_t>(tri[2])]);
    if (cp.distance_sq < best_d) {
      best_d = cp.distance_sq;
      best.triangle = static_cast<int>(f);
      best.bary = cp.bary;
    }
  }
  return best;
}

}  // namespace

UvnTransfer::UvnTransfer(const TriangleMesh& body_rest, std::span<const Vec3> cloth_rest)
    : triangles_(body_rest.triangles), uv_(body_rest.uv), cloth_rest_(cloth_rest.begin(), cloth_rest.end()) {
  if (!body_rest.has_uv()) throw DegenerateFrame("body surface has no uv parameterization");
  if (triangles_.empty()) throw EmptyMesh("body surface has no triangles");
  const auto normals = vertex_normals(body_rest.vertices, triangles_);
  const auto tangents = uv_tangents(body_rest.vertices, triangles_, uv_);
  anchors_.resize(cloth_rest_.size());
  rest_frames_.resize(cloth_rest_.size());
  parallel_for(cloth_rest_.size(), [&](std::size_t i) {
    anchors_[i] = closest_anchor(cloth_rest_[i], body_rest.vertices, triangles_);
    rest_frames_[i] = frame(body_rest.vertices, normals, tangents, anchors_[i]);
  });
}

UvnFrame UvnTransfer::frame(std::span<const Vec3> positions, std::span<const Vec3> normals,
                            std::span<const Vec3> tangents, const SurfaceAnchor& anchor) const {
  const auto& tri = triangles_[static_cast<std::size_t>(anchor.triangle)];
  UvnFrame f;
  Vec3 n = Vec3::Zero();
  Vec3 t = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    const auto v = static_cast<std::size_t>(tri[static_cast<std::size_t>(k)]);
    const double w = anchor.bary[static_cast<std::size_t>(k)];
    f.origin += w * positions[v];
    n += w * normals[v];
    t += w * tangents[v];
  }
  const double n_len = n.norm();
  if (!(n_len > 1e-12)) throw DegenerateFrame("zero normal at surface anchor");
  n /= n_len;
  const double t_len = t.norm();
  t -= t.dot(n) * n;
  const double t_perp = t.norm();
  if (!(t_perp > 1e-9 * t_len) || !(t_perp > 0.0)) throw DegenerateFrame("uv tangent parallel to normal at anchor");
  t /= t_perp;
  f.axes.col(0) = t;
  f.axes.col(1) = n.cross(t);
  f.axes.col(2) = n;
  return f;
}

DisplacementField UvnTransfer::operator()(std::span<const Vec3> body_posed, std::span<const Vec3> gt_positions,
                                          int pose_id) const {
  if (gt_positions.size() != cloth_rest_.size()) throw ShapeMismatch("ground truth and cloth sizes differ");
  if (body_posed.size() != uv_.size()) throw ShapeMismatch("posed body vertex count differs from rest");
  const auto normals = vertex_normals(body_posed, triangles_);
  const auto tangents = uv_tangents(body_posed, triangles_, uv_);
  DisplacementField field;
  field.pose_id = pose_id;
  field.d.resize(cloth_rest_.size());
  parallel_for(cloth_rest_.size(), [&](std::size_t i) {
    const UvnFrame posed = frame(body_posed, normals, tangents, anchors_[i]);
    const Vec3 offset = posed.axes.transpose() * (gt_positions[i] - posed.origin);
    const UvnFrame& rest = rest_frames_[i];
    field.d[i] = (rest.origin + rest.axes * offset) - cloth_rest_[i];
  });
  return field;
}

DisplacementField hybrid(const Backmap& backmap, const DisplacementField& uvn_field,
                         std::span<const Vec3> cloth_rest, std::span<const Edge> edges,
                         const HybridOptions& options, HybridStats* stats) {
  const std::size_t n = cloth_rest.size();
  if (backmap.vertices.size() != n || uvn_field.d.size() != n) throw ShapeMismatch("hybrid inputs differ in size");
  if (!(options.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  HybridStats local;
  DisplacementField out;
  out.pose_id = uvn_field.pose_id;
  out.d = uvn_field.d;
  std::vector<char> valid(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& cands = backmap.vertices[i].candidates;
    if (cands.empty()) {
      ++local.no_parent;
      continue;
    }
    if (cands.size() == 1) {
      out.d[i] = cands.front().material - cloth_rest[i];
      valid[i] = 1;
      ++local.single;
      continue;
    }
    const Vec3 target = cloth_rest[i] + uvn_field.d[i];
    const BackmapCandidate* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& c : cands) {
      const double dist = (c.material - target).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = &c;
      }
    }
    if (best_dist < options.tau) {
      out.d[i] = best->material - cloth_rest[i];
      valid[i] = 1;
      ++local.multi_valid;
    } else {
      ++local.multi_invalid;
    }
  }

  // Components holding no valid vertex have nothing to morph toward; they
  // keep the UVN values.
  int num_components = 0;
  const auto component = connected_components(n, edges, &num_components);
  std::vector<char> anchored(static_cast<std::size_t>(num_components), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i]) anchored[static_cast<std::size_t>(component[i])] = 1;
  }
  std::map<int, Vec3> dirichlet;
  std::size_t free_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i] || !anchored[static_cast<std::size_t>(component[i])]) {
      dirichlet.emplace(static_cast<int>(i), out.d[i]);
    } else {
      ++free_count;
    }
  }

  while (free_count > 0) {
    const auto morphed = poisson_morph(n, edges, uvn_field.d, dirichlet, options.morph);
    ++local.morph_rounds;
    std::size_t added = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dirichlet.count(static_cast<int>(i))) continue;
      out.d[i] = morphed[i];
      if ((morphed[i] - uvn_field.d[i]).norm() < options.tau) {
        dirichlet.emplace(static_cast<int>(i), morphed[i]);
        ++added;
      }
    }
    local.morph_validated += added;
    free_count -= added;
    if (added == 0) break;
  }
  local.unvalidated = free_count;
  if (stats) *stats = local;
  return out;
}

Embedding embed_material_points(std::span<const Vec3> material, const TetLocator& rest,
                                const ReconstructOptions& options, std::vector<std::size_t>* clamped,
                                std::vector<std::size_t>* no_parent) {
  Embedding emb(material.size());
  std::vector<char> status(material.size(), 0);
  parallel_for(material.size(), [&](std::size_t i) {
    const auto list = rest.candidates(material[i], options.eps);
    if (!list.empty()) {
      emb[i] = {list.front().tet, list.front().bary};
      return;
    }
    const auto near =
        nearest_candidate(material[i], rest.bvh(), rest.vertices(), rest.tets(), rest.typical_size(),
                          options.fallback_radius);
    if (near) {
      emb[i] = {near->tet, project_to_simplex(near->bary)};
      status[i] = 1;
    } else {
      status[i] = 2;
    }
  });
  for (std::size_t i = 0; i < status.size(); ++i) {
    if (status[i] == 1 && clamped) clamped->push_back(i);
    if (status[i] == 2 && no_parent) no_parent->push_back(i);
  }
  return emb;
}

Reconstruction reconstruct(const DisplacementField& field, std::span<const Vec3> cloth_rest, const TetLocator& rest,
                           const SkinWeights& weights, std::span<const Affine> skinning,
                           const ReconstructOptions& options) {
  if (field.d.size() != cloth_rest.size()) throw ShapeMismatch("field and cloth sizes differ");
  std::vector<Vec3> material(cloth_rest.size());
  for (std::size_t i = 0; i < material.size(); ++i) material[i] = cloth_rest[i] + field.d[i];
  Reconstruction out;
  out.embedding = embed_material_points(material, rest, options, &out.clamped, &out.no_parent);
  Embedding located;
  std::vector<std::size_t> located_ids;
  std::vector<char> missing(material.size(), 0);
  for (std::size_t i : out.no_parent) missing[i] = 1;
  for (std::size_t i = 0; i < material.size(); ++i) {
    if (missing[i]) continue;
    located.push_back(out.embedding[i]);
    located_ids.push_back(i);
  }
  const auto posed = skin_embedded(located, rest.tets(), rest.vertices(), weights, skinning);
  out.positions = material;
  for (std::size_t k = 0; k < located_ids.size(); ++k) out.positions[located_ids[k]] = posed[k];
  return out;
}

void write_displacement(std::ostream& out, const DisplacementField& field) {
  out << "kdsm-disp 1\n" << field.pose_id << ' ' << field.d.size() << '\n';
  out << std::setprecision(17);
  for (const auto& d : field.d) out << d.x() << ' ' << d.y() << ' ' << d.z() << '\n';
}

void write_displacement(const std::string& path, const DisplacementField& field) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_displacement(out, field);
  if (!out) throw FormatError("failed writing " + path);
}

DisplacementField read_displacement(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "kdsm-disp" || version != 1) {
    throw FormatError("not a kdsm-disp 1 file");
  }
  DisplacementField field;
  std::size_t n = 0;
  if (!(in >> field.pose_id >> n)) throw FormatError("bad displacement header");
  field.d.resize(n);
  for (auto& d : field.d) {
    if (!(in >> d.x() >> d.y() >> d.z())) throw FormatError("truncated displacement file");
    if (!d.allFinite()) throw FormatError("non-finite displacement");
  }
  return field;
}

DisplacementField read_displacement(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_displacement(in);
}

}  // namespace kdsm
