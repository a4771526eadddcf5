#pragma once

#include <string>
#include <vector>

#include "kdsm/skinning.hpp"
#include "kdsm/synthetic.hpp"

namespace kdsm {

// JSON files. Skeleton: {"joints": [{"name", "parent", "R": [9 row-major],
// "t": [3]}], "bones": [{"joint", "a", "b"}]}.
void write_skeleton(const std::string& path, const Skeleton& skeleton, const std::vector<Bone>& bones);
Skeleton read_skeleton(const std::string& path, std::vector<Bone>* bones = nullptr);

// {"poses": [{"angles": [[x, y, z], ...], "root": [3]}], "overlap": [...]}
void write_poses(const std::string& path, const PoseSet& poses);
PoseSet read_poses(const std::string& path);

// {"weights": [[[joint, weight], ...], ...]}
void write_weights(const std::string& path, const SkinWeights& weights);
SkinWeights read_weights(const std::string& path);

}  // namespace kdsm
