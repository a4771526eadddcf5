#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kdsm/geometry.hpp"

namespace kdsm {

// Wavefront OBJ with v / vt / f records and 1-based indices. Texture
// coordinates are per vertex; a third vt component carries the cloth side
// label (0 front, 1 back) when present.

TriangleMesh read_obj(std::istream& in, std::vector<ClothSide>* side = nullptr);
TriangleMesh read_obj(const std::string& path, std::vector<ClothSide>* side = nullptr);

void write_obj(std::ostream& out, const TriangleMesh& mesh, const std::vector<ClothSide>* side = nullptr);
void write_obj(const std::string& path, const TriangleMesh& mesh, const std::vector<ClothSide>* side = nullptr);

ClothMesh read_cloth_obj(const std::string& path);
void write_cloth_obj(const std::string& path, const ClothMesh& cloth);

}  // namespace kdsm
