#include "kdsm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Geometry>

#include "kdsm/errors.hpp"
#include "kdsm/parallel.hpp"

namespace kdsm {

namespace {

constexpr double kPi = std::numbers::pi;

double deg(double d) { return d * kPi / 180.0; }

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

void append_mesh(TriangleMesh& dst, const TriangleMesh& src) {
  const int base = static_cast<int>(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
  dst.uv.insert(dst.uv.end(), src.uv.begin(), src.uv.end());
  for (const auto& t : src.triangles) dst.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

}  // namespace

TriangleMesh capsule_mesh(const Capsule& capsule, int segments, double ring_spacing) {
  if (segments < 3 || !(ring_spacing > 0.0) || !(capsule.radius > 0.0)) {
    throw std::invalid_argument("bad capsule resolution");
  }
  const Vec3 axis = capsule.b - capsule.a;
  const double length = axis.norm();
  if (!(length > 0.0)) throw std::invalid_argument("capsule axis has zero length");
  const Vec3 d = axis / length;
  const Vec3 e1 = d.unitOrthogonal();
  const Vec3 e2 = d.cross(e1);
  const double r = capsule.radius;

  // Profile rings: (center offset along d, ring radius, arc length).
  struct Ring {
    double along;
    double radius;
    double arc;
  };
  const int cap_rings = std::max(2, static_cast<int>(std::ceil(0.5 * kPi * r / ring_spacing)));
  const int body_rings = std::max(1, static_cast<int>(std::ceil(length / ring_spacing)));
  std::vector<Ring> rings;
  const double cap_arc = 0.5 * kPi * r;
  for (int k = 1; k <= cap_rings; ++k) {
    const double phi = -0.5 * kPi + 0.5 * kPi * k / cap_rings;
    rings.push_back({r * std::sin(phi), r * std::cos(phi), cap_arc * k / cap_rings});
  }
  for (int k = 1; k <= body_rings; ++k) {
    rings.push_back({length * k / body_rings, r, cap_arc + length * k / body_rings});
  }
  for (int k = 1; k < cap_rings; ++k) {
    const double phi = 0.5 * kPi * k / cap_rings;
    rings.push_back({length + r * std::sin(phi), r * std::cos(phi), cap_arc + length + cap_arc * k / cap_rings});
  }
  const double total_arc = 2.0 * cap_arc + length;

  TriangleMesh mesh;
  mesh.vertices.push_back(capsule.a - r * d);
  mesh.uv.emplace_back(0.0, 0.0);
  for (const auto& ring : rings) {
    for (int j = 0; j < segments; ++j) {
      const double theta = 2.0 * kPi * j / segments;
      mesh.vertices.push_back(capsule.a + ring.along * d + ring.radius * (std::cos(theta) * e1 + std::sin(theta) * e2));
      mesh.uv.emplace_back(static_cast<double>(j) / segments, ring.arc / total_arc);
    }
  }
  mesh.vertices.push_back(capsule.b + r * d);
  mesh.uv.emplace_back(0.0, 1.0);

  const int num_rings = static_cast<int>(rings.size());
  auto id = [&](int ring, int j) { return 1 + ring * segments + (j % segments); };
  for (int j = 0; j < segments; ++j) mesh.triangles.push_back({0, id(0, j + 1), id(0, j)});
  for (int i = 0; i + 1 < num_rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      mesh.triangles.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
    }
  }
  const int top = static_cast<int>(mesh.vertices.size()) - 1;
  for (int j = 0; j < segments; ++j) mesh.triangles.push_back({top, id(num_rings - 1, j), id(num_rings - 1, j + 1)});
  return mesh;
}

Mannequin make_mannequin(const MannequinOptions& options) {
  Mannequin m;
  struct Spec {
    const char* name;
    const char* parent;
    Vec3 pos;
  };
  const std::vector<Spec> specs = {
      {"pelvis", "", {0, 2, 0}},          {"spine", "pelvis", {0, 20, 0}},
      {"chest", "spine", {0, 38, 0}},     {"neck", "chest", {0, 58, 0}},
      {"head", "neck", {0, 66, 0}},       {"l_clavicle", "chest", {3, 52, 0}},
      {"l_shoulder", "l_clavicle", {12, 52, 0}}, {"l_elbow", "l_shoulder", {40, 52, 0}},
      {"l_wrist", "l_elbow", {60, 52, 0}}, {"r_clavicle", "chest", {-3, 52, 0}},
      {"r_shoulder", "r_clavicle", {-12, 52, 0}}, {"r_elbow", "r_shoulder", {-40, 52, 0}},
      {"r_wrist", "r_elbow", {-60, 52, 0}}, {"l_hip", "pelvis", {9, 2, 0}},
      {"r_hip", "pelvis", {-9, 2, 0}},
  };
  for (const auto& s : specs) {
    Joint j;
    j.name = s.name;
    j.parent = std::string(s.parent).empty() ? -1 : m.skeleton.find(s.parent);
    j.rest = Affine::translation(s.pos);
    m.skeleton.joints.push_back(j);
  }
  m.skeleton.validate();

  auto pos = [&](const char* name) { return m.skeleton.joints[static_cast<std::size_t>(m.skeleton.find(name))].rest.t; };
  auto bone = [&](const char* name, const Vec3& tip) { m.bones.push_back({m.skeleton.find(name), pos(name), tip}); };
  bone("pelvis", pos("spine"));
  bone("spine", pos("chest"));
  bone("chest", pos("neck"));
  bone("neck", pos("head"));
  bone("head", pos("head") + Vec3(0, 10, 0));
  for (const char* side : {"l", "r"}) {
    const std::string s(side);
    const double sx = s == "l" ? 1.0 : -1.0;
    bone((s + "_clavicle").c_str(), pos((s + "_shoulder").c_str()));
    bone((s + "_shoulder").c_str(), pos((s + "_elbow").c_str()));
    bone((s + "_elbow").c_str(), pos((s + "_wrist").c_str()));
    bone((s + "_wrist").c_str(), pos((s + "_wrist").c_str()) + Vec3(8 * sx, 0, 0));
    bone((s + "_hip").c_str(), pos((s + "_hip").c_str()) + Vec3(0, -40, 0));
  }

  m.capsules = {
      {{0, 2, 0}, {0, 46, 0}, 12.0},   {{10, 52, 0}, {40, 52, 0}, 5.5},  {{40, 52, 0}, {60, 52, 0}, 4.5},
      {{-10, 52, 0}, {-40, 52, 0}, 5.5}, {{-40, 52, 0}, {-60, 52, 0}, 4.5},
  };
  for (const auto& c : m.capsules) append_mesh(m.body, capsule_mesh(c, options.segments, options.ring_spacing));
  m.body_weights = assign_weights(m.body.vertices, m.bones);
  return m;
}

double body_depth(const std::vector<Capsule>& capsules, double x, double y) {
  double depth = 0.0;
  const Vec2 p(x, y);
  for (const auto& c : capsules) {
    const double dist = segment_distance(p, c.a.head<2>(), c.b.head<2>());
    if (dist < c.radius) depth = std::max(depth, std::sqrt(c.radius * c.radius - dist * dist));
  }
  return depth;
}

ClothMesh make_shirt(const std::vector<Capsule>& body, const ShirtOptions& o) {
  const int nx = o.torso_half_cells + o.sleeve_cells_x;
  const int ny = o.torso_cells_y;
  const int sleeve_y0 = ny - o.sleeve_cells_y;
  if (o.torso_half_cells < 1 || o.sleeve_cells_x < 1 || sleeve_y0 < 1 || o.neck_half_cells >= o.torso_half_cells) {
    throw std::invalid_argument("bad shirt layout");
  }
  auto cell_in = [&](int cx, int cy) {
    if (cy < 0 || cy >= ny || cx < -nx || cx >= nx) return false;
    if (cx >= -o.torso_half_cells && cx < o.torso_half_cells) return true;
    return cy >= sleeve_y0;
  };
  // Boundary edges between an inside and an outside cell, split into open
  // (hem, cuffs, neck) and sewn.
  struct Seg {
    int x0, y0, x1, y1;
  };
  std::vector<Seg> seams;
  std::map<std::pair<int, int>, char> seam_node;
  auto add_edge = [&](int x0, int y0, int x1, int y1) {
    const bool horizontal = y0 == y1;
    bool open = false;
    if (horizontal && y0 == 0) open = true;
    if (!horizontal && std::abs(x0) == nx) open = true;
    if (horizontal && y0 == ny && std::abs(x0) <= o.neck_half_cells && std::abs(x1) <= o.neck_half_cells) open = true;
    if (open) return;
    seams.push_back({x0, y0, x1, y1});
    seam_node[{x0, y0}] = 1;
    seam_node[{x1, y1}] = 1;
  };
  for (int cy = -1; cy <= ny; ++cy) {
    for (int cx = -nx - 1; cx <= nx; ++cx) {
      const bool in = cell_in(cx, cy);
      if (in != cell_in(cx + 1, cy)) add_edge(cx + 1, cy, cx + 1, cy + 1);
      if (in != cell_in(cx, cy + 1)) add_edge(cx, cy + 1, cx + 1, cy + 1);
    }
  }

  auto node_in = [&](int ix, int iy) {
    return cell_in(ix, iy) || cell_in(ix - 1, iy) || cell_in(ix, iy - 1) || cell_in(ix - 1, iy - 1);
  };
  const double s = o.spacing;
  auto height = [&](int ix, int iy) {
    const Vec2 p(ix * s, iy * s);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& g : seams) {
      d = std::min(d, segment_distance(p, Vec2(g.x0 * s, g.y0 * s), Vec2(g.x1 * s, g.y1 * s)));
    }
    return std::min(body_depth(body, p.x(), p.y()) + o.clearance, o.rounding * std::sqrt(d));
  };
  auto uv_of = [&](int ix, int iy) { return Vec2(0.5 + ix * s / 68.0, 0.5 + (iy * s - 30.0) / 68.0); };

  ClothMesh cloth;
  std::map<std::pair<int, int>, int> front_id;
  std::map<std::pair<int, int>, int> back_id;
  for (int iy = 0; iy <= ny; ++iy) {
    for (int ix = -nx; ix <= nx; ++ix) {
      if (!node_in(ix, iy)) continue;
      const bool seam = seam_node.count({ix, iy}) > 0;
      const double h = seam ? 0.0 : height(ix, iy);
      front_id[{ix, iy}] = static_cast<int>(cloth.mesh.vertices.size());
      if (seam) back_id[{ix, iy}] = front_id[{ix, iy}];
      cloth.mesh.vertices.emplace_back(ix * s, iy * s, h);
      cloth.mesh.uv.push_back(uv_of(ix, iy));
      cloth.side.push_back(ClothSide::kFront);
    }
  }
  for (int iy = 0; iy <= ny; ++iy) {
    for (int ix = -nx; ix <= nx; ++ix) {
      if (!node_in(ix, iy) || seam_node.count({ix, iy})) continue;
      back_id[{ix, iy}] = static_cast<int>(cloth.mesh.vertices.size());
      cloth.mesh.vertices.emplace_back(ix * s, iy * s, -height(ix, iy));
      cloth.mesh.uv.push_back(uv_of(ix, iy));
      cloth.side.push_back(ClothSide::kBack);
    }
  }
  for (int cy = 0; cy < ny; ++cy) {
    for (int cx = -nx; cx < nx; ++cx) {
      if (!cell_in(cx, cy)) continue;
      const int f00 = front_id[{cx, cy}], f10 = front_id[{cx + 1, cy}];
      const int f11 = front_id[{cx + 1, cy + 1}], f01 = front_id[{cx, cy + 1}];
      cloth.mesh.triangles.push_back({f00, f10, f11});
      cloth.mesh.triangles.push_back({f00, f11, f01});
      const int b00 = back_id[{cx, cy}], b10 = back_id[{cx + 1, cy}];
      const int b11 = back_id[{cx + 1, cy + 1}], b01 = back_id[{cx, cy + 1}];
      cloth.mesh.triangles.push_back({b00, b11, b10});
      cloth.mesh.triangles.push_back({b00, b01, b11});
    }
  }
  return cloth;
}

PoseSet sample_poses(const Skeleton& skeleton, std::size_t count, std::uint64_t seed, int overlap_every,
                     const PoseRanges& r) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto sym = [&](double range) { return deg(uni(-range, range)); };
  auto joint = [&](const char* name) {
    const int j = skeleton.find(name);
    if (j < 0) throw std::invalid_argument(std::string("skeleton lacks joint ") + name);
    return static_cast<std::size_t>(j);
  };
  PoseSet set;
  for (std::size_t i = 0; i < count; ++i) {
    Pose pose = Pose::rest(skeleton.size());
    const bool overlap = overlap_every > 0 && i % static_cast<std::size_t>(overlap_every) ==
                                                   static_cast<std::size_t>(overlap_every - 1);
    for (const char* name : {"spine", "chest", "neck", "head"}) {
      const double range = std::string(name) == "spine" || std::string(name) == "chest" ? r.spine : r.neck;
      pose.angles[joint(name)] = Vec3(sym(range), sym(range), sym(range));
    }
    for (const char* name : {"l_clavicle", "r_clavicle"}) pose.angles[joint(name)] = Vec3(0, sym(r.clavicle), sym(r.clavicle));
    for (const char* name : {"l_hip", "r_hip"}) pose.angles[joint(name)] = Vec3(sym(r.hip), sym(r.hip), sym(r.hip));
    for (int side = 0; side < 2; ++side) {
      const double sx = side == 0 ? 1.0 : -1.0;
      const std::size_t shoulder = joint(side == 0 ? "l_shoulder" : "r_shoulder");
      const std::size_t elbow = joint(side == 0 ? "l_elbow" : "r_elbow");
      double down;
      double swing;
      double flex;
      if (overlap) {
        down = uni(r.overlap_min, r.overlap_max);
        swing = uni(-10.0, 10.0);
        flex = uni(0.0, 30.0);
      } else {
        down = uni(-r.shoulder_up, r.shoulder_down);
        swing = uni(-r.shoulder_swing, r.shoulder_swing);
        flex = uni(0.0, r.elbow_flex);
      }
      const double twist = sym(r.shoulder_twist);
      pose.angles[shoulder] = Vec3(twist, deg(sx * swing), deg(-sx * down));
      pose.angles[elbow] = Vec3(0, deg(-sx * flex), 0);
    }
    set.poses.push_back(std::move(pose));
    set.overlap.push_back(overlap ? 1 : 0);
  }
  return set;
}

GarmentRig make_garment_rig(const ClothMesh& cloth, const Mannequin& mannequin, std::uint64_t seed,
                            const WrinkleOptions& options) {
  const std::size_t n = cloth.num_vertices();
  const std::size_t nj = mannequin.skeleton.size();
  const auto& body = mannequin.body;
  if (mannequin.body_weights.size() != body.num_vertices()) throw ShapeMismatch("body weights missing");
  std::vector<Eigen::VectorXd> dense(n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nj)));
  // The body's bone-distance field, sampled at the cloth.
  const SkinWeights field = assign_weights(cloth.mesh.vertices, mannequin.bones);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& jw : field.per_vertex[i]) dense[i][jw.joint] += jw.weight;
  }
  const auto neighbors = vertex_neighbors(n, edge_list(cloth.mesh));
  for (int it = 0; it < options.smoothing_iterations; ++it) {
    std::vector<Eigen::VectorXd> next(dense);
    for (std::size_t i = 0; i < n; ++i) {
      if (neighbors[i].empty()) continue;
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nj));
      for (int nb : neighbors[i]) avg += dense[static_cast<std::size_t>(nb)];
      next[i] = 0.5 * dense[i] + 0.5 * avg / static_cast<double>(neighbors[i].size());
    }
    dense.swap(next);
  }
  GarmentRig rig;
  rig.weights.per_vertex.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<JointWeight> w;
    for (std::size_t j = 0; j < nj; ++j) {
      if (dense[i][static_cast<Eigen::Index>(j)] > 0.0) w.push_back({static_cast<int>(j), dense[i][static_cast<Eigen::Index>(j)]});
    }
    rig.weights.per_vertex[i] = normalize_influences(std::move(w));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  const double k = 2.0 * kPi / (options.wavelength * options.uv_per_cm);
  for (const char* name : {"spine", "chest", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow"}) {
    const int j = mannequin.skeleton.find(name);
    if (j < 0) continue;
    WrinkleTerm term;
    term.joint = j;
    term.amplitude = options.amplitude;
    term.sigma = options.sigma;
    term.wavenumber = k;
    const double a = angle(rng);
    term.direction = Vec2(std::cos(a), std::sin(a));
    term.phase = angle(rng);
    rig.wrinkles.push_back(term);
  }
  return rig;
}

GroundTruthFrame gen_synthetic_gt(const Pose& pose, const ClothMesh& cloth, const GarmentRig& rig,
                                  const Skeleton& skeleton, int pose_id) {
  GroundTruthFrame frame;
  frame.pose_id = pose_id;
  frame.pose = pose;
  if (pose.is_rest()) {
    frame.positions = cloth.mesh.vertices;
    return frame;
  }
  const auto skinning = skinning_transforms(skeleton, pose);
  const auto world = world_transforms(skeleton, pose);
  frame.positions = skin_vertices(cloth.mesh.vertices, rig.weights, skinning);
  const auto normals = vertex_normals(frame.positions, cloth.mesh.triangles);
  std::vector<double> scale(rig.wrinkles.size());
  for (std::size_t b = 0; b < rig.wrinkles.size(); ++b) {
    const double bend = bend_angle(pose.angles[static_cast<std::size_t>(rig.wrinkles[b].joint)]);
    scale[b] = rig.wrinkles[b].amplitude * 0.5 * (1.0 - std::cos(bend));
  }
  for (std::size_t i = 0; i < frame.positions.size(); ++i) {
    const Vec3 x = frame.positions[i];
    double w = 0.0;
    for (std::size_t b = 0; b < rig.wrinkles.size(); ++b) {
      if (scale[b] == 0.0) continue;
      const auto& t = rig.wrinkles[b];
      const Vec3& p = world[static_cast<std::size_t>(t.joint)].t;
      const double falloff = std::exp(-(x - p).squaredNorm() / (2.0 * t.sigma * t.sigma));
      w += scale[b] * falloff * std::sin(t.wavenumber * cloth.mesh.uv[i].dot(t.direction) + t.phase);
    }
    frame.positions[i] += w * normals[i];
  }
  return frame;
}

}  // namespace kdsm
