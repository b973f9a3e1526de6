#pragma once

#include "geometry.hpp"
#include "skin.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace avf::assets {

struct GltfPart {
  std::string name;
  const Mesh* mesh = nullptr;
  const skin::SkinBinding* binding = nullptr; // null for a static part
  std::map<std::string, std::string> textures; // "albedo", "normal_map" -> uri
};

struct GltfScene {
  Skeleton skeleton;
  std::vector<GltfPart> parts;
  std::vector<Pose> poses; // empty: rest pose, no animation
  double frameTime = 1.0 / 30.0;
};

/// Binary glTF 2.0. Joints become nodes (local translation = rest offset,
/// rotation = first pose); each bound part gets its own skin with inverse bind
/// matrices taken from its bind pose. One animation carries per-joint
/// rotations and the root translation, keyed at i * frameTime. Texture files
/// are referenced by uri. Throws Error(Dimension) on an inconsistent binding.
std::vector<std::uint8_t> exportGlb(const GltfScene& scene);
void saveGlb(const GltfScene& scene, const std::filesystem::path& path);

} // namespace avf::assets
