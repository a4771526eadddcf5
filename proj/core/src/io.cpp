#include "kdsm/io.hpp"

#include <fstream>

#include "json.hpp"
#include "kdsm/errors.hpp"

namespace kdsm {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 to_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void save(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw FormatError("failed writing " + path);
}

json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace

void write_skeleton(const std::string& path, const Skeleton& skeleton, const std::vector<Bone>& bones) {
  json j;
  j["joints"] = json::array();
  for (const auto& joint : skeleton.joints) {
    json r = json::array();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) r.push_back(joint.rest.R(a, b));
    }
    j["joints"].push_back({{"name", joint.name}, {"parent", joint.parent}, {"R", r}, {"t", vec(joint.rest.t)}});
  }
  j["bones"] = json::array();
  for (const auto& b : bones) j["bones"].push_back({{"joint", b.joint}, {"a", vec(b.a)}, {"b", vec(b.b)}});
  save(path, j);
}

Skeleton read_skeleton(const std::string& path, std::vector<Bone>* bones) {
  const json j = load(path);
  Skeleton s;
  try {
    for (const auto& jj : j.at("joints")) {
      Joint joint;
      joint.name = jj.at("name").get<std::string>();
      joint.parent = jj.at("parent").get<int>();
      const auto& r = jj.at("R");
      if (r.size() != 9) throw FormatError("joint rotation needs 9 entries");
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) joint.rest.R(a, b) = r[static_cast<std::size_t>(3 * a + b)].get<double>();
      }
      joint.rest.t = to_vec(jj.at("t"));
      s.joints.push_back(joint);
    }
    if (bones) {
      bones->clear();
      if (j.contains("bones")) {
        for (const auto& jb : j["bones"]) bones->push_back({jb.at("joint").get<int>(), to_vec(jb.at("a")), to_vec(jb.at("b"))});
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  s.validate();
  return s;
}

void write_poses(const std::string& path, const PoseSet& poses) {
  json j;
  j["poses"] = json::array();
  for (const auto& p : poses.poses) {
    json angles = json::array();
    for (const auto& a : p.angles) angles.push_back(vec(a));
    j["poses"].push_back({{"angles", angles}, {"root", vec(p.root_translation)}});
  }
  j["overlap"] = json::array();
  for (char o : poses.overlap) j["overlap"].push_back(o != 0);
  save(path, j);
}

PoseSet read_poses(const std::string& path) {
  const json j = load(path);
  PoseSet set;
  try {
    const json& list = j.is_array() ? j : j.at("poses");
    for (const auto& jp : list) {
      Pose p;
      for (const auto& a : jp.at("angles")) p.angles.push_back(to_vec(a));
      if (jp.contains("root")) p.root_translation = to_vec(jp["root"]);
      set.poses.push_back(std::move(p));
    }
    if (j.is_object() && j.contains("overlap")) {
      for (const auto& o : j["overlap"]) set.overlap.push_back(o.get<bool>() ? 1 : 0);
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  set.overlap.resize(set.poses.size(), 0);
  return set;
}

void write_weights(const std::string& path, const SkinWeights& weights) {
  json j;
  j["weights"] = json::array();
  for (const auto& v : weights.per_vertex) {
    json list = json::array();
    for (const auto& jw : v) list.push_back(json::array({jw.joint, jw.weight}));
    j["weights"].push_back(list);
  }
  save(path, j);
}

SkinWeights read_weights(const std::string& path) {
  const json j = load(path);
  SkinWeights w;
  try {
    for (const auto& v : j.at("weights")) {
      std::vector<JointWeight> list;
      for (const auto& e : v) list.push_back({e.at(0).get<int>(), e.at(1).get<double>()});
      w.per_vertex.push_back(std::move(list));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return w;
}

}  // namespace kdsm
