#include "kdsm/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kdsm/errors.hpp"

namespace kdsm {

namespace {

// Parses "v", "v/t", "v//n", "v/t/n"; returns the vertex and texture index
// (0-based, -1 when absent).
std::pair<int, int> parse_face_vertex(const std::string& token, std::size_t nv, std::size_t nt) {
  auto resolve = [](long idx, std::size_t count) -> int {
    if (idx > 0) return static_cast<int>(idx - 1);
    if (idx < 0) return static_cast<int>(static_cast<long>(count) + idx);
    throw FormatError("OBJ index 0 is invalid");
  };
  const auto slash = token.find('/');
  const long v = std::stol(token.substr(0, slash));
  int t = -1;
  if (slash != std::string::npos) {
    const auto slash2 = token.find('/', slash + 1);
    const std::string ts = token.substr(slash + 1, slash2 == std::string::npos ? std::string::npos : slash2 - slash - 1);
    if (!ts.empty()) t = resolve(std::stol(ts), nt);
  }
  return {resolve(v, nv), t};
}

}  // namespace

TriangleMesh read_obj(std::istream& in, std::vector<ClothSide>* side) {
  TriangleMesh mesh;
  std::vector<Vec2> tex;
  std::vector<double> tex_w;
  std::vector<int> vertex_tex;
  bool any_w = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw FormatError("bad v record at line " + std::to_string(line_no));
      mesh.vertices.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ls >> t.x() >> t.y())) throw FormatError("bad vt record at line " + std::to_string(line_no));
      double w = 0.0;
      if (ls >> w) any_w = true;
      tex.push_back(t);
      tex_w.push_back(w);
    } else if (tag == "f") {
      std::vector<std::pair<int, int>> corners;
      std::string tok;
      while (ls >> tok) corners.push_back(parse_face_vertex(tok, mesh.vertices.size(), tex.size()));
      if (corners.size() < 3) throw FormatError("face with fewer than 3 vertices at line " + std::to_string(line_no));
      vertex_tex.resize(mesh.vertices.size(), -1);
      for (const auto& [v, t] : corners) {
        if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size()) {
          throw FormatError("face index out of range at line " + std::to_string(line_no));
        }
        if (t >= 0) vertex_tex[static_cast<std::size_t>(v)] = t;
      }
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
        mesh.triangles.push_back({corners[0].first, corners[k].first, corners[k + 1].first});
      }
    }
  }
  if (!tex.empty()) {
    vertex_tex.resize(mesh.vertices.size(), -1);
    mesh.uv.assign(mesh.vertices.size(), Vec2::Zero());
    if (side) side->assign(mesh.vertices.size(), ClothSide::kFront);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      // Files written without explicit f v/t pairs map vt i to v i.
      int t = vertex_tex[v];
      if (t < 0 && v < tex.size()) t = static_cast<int>(v);
      if (t < 0) continue;
      mesh.uv[v] = tex[static_cast<std::size_t>(t)];
      if (side && any_w) (*side)[v] = tex_w[static_cast<std::size_t>(t)] > 0.5 ? ClothSide::kBack : ClothSide::kFront;
    }
  }
  return mesh;
}

TriangleMesh read_obj(const std::string& path, std::vector<ClothSide>* side) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_obj(in, side);
}

void write_obj(std::ostream& out, const TriangleMesh& mesh, const std::vector<ClothSide>* side) {
  char buf[160];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  const bool uv = mesh.has_uv();
  for (std::size_t i = 0; i < mesh.uv.size(); ++i) {
    if (side) {
      std::snprintf(buf, sizeof buf, "vt %.17g %.17g %d\n", mesh.uv[i].x(), mesh.uv[i].y(),
                    static_cast<int>((*side)[i]));
    } else {
      std::snprintf(buf, sizeof buf, "vt %.17g %.17g\n", mesh.uv[i].x(), mesh.uv[i].y());
    }
    out << buf;
  }
  for (const auto& t : mesh.triangles) {
    if (uv) {
      std::snprintf(buf, sizeof buf, "f %d/%d %d/%d %d/%d\n", t[0] + 1, t[0] + 1, t[1] + 1, t[1] + 1, t[2] + 1,
                    t[2] + 1);
    } else {
      std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out << buf;
  }
}

void write_obj(const std::string& path, const TriangleMesh& mesh, const std::vector<ClothSide>* side) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_obj(out, mesh, side);
}

ClothMesh read_cloth_obj(const std::string& path) {
  ClothMesh cloth;
  cloth.mesh = read_obj(path, &cloth.side);
  if (!cloth.mesh.has_uv()) throw FormatError(path + ": cloth mesh needs vt records");
  return cloth;
}

void write_cloth_obj(const std::string& path, const ClothMesh& cloth) {
  write_obj(path, cloth.mesh, &cloth.side);
}

}  // namespace kdsm
