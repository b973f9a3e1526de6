#pragma once

#include "geometry.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace avf::assets {

/// Reads v / vt / vn / f records. Per-vertex attributes come from the first
/// face corner that references a vertex; polygons above 4 sides are fanned
/// into triangles. Other records (o, g, s, usemtl, mtllib) are ignored.
Mesh importObj(std::string_view text);

/// Deterministic: shortest round-trip decimal for every value.
std::string exportObj(const Mesh& mesh);

/// Several named objects in one file, vertex indices offset per object.
std::string exportObjScene(const std::vector<std::pair<std::string, const Mesh*>>& objects);

Mesh loadObj(const std::filesystem::path& path);
void saveObj(const Mesh& mesh, const std::filesystem::path& path);

/// Shortest decimal representation that parses back to the same double.
std::string formatNumber(double v);

} // namespace avf::assets
