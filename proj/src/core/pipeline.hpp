#pragma once

#include "bone_names.hpp"
#include "library.hpp"
#include "shape_model.hpp"
#include "skin.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Offline avatar evaluation shared by batch generation and the session
// service: shape, dress, pose.
namespace avf::pipeline {

struct DressedGarment {
  std::string id;
  Mesh mesh; // rest pose, resolved against the shaped body
  skin::SkinBinding binding;
};

struct DressedAvatar {
  Mesh body; // shaped rest mesh
  std::vector<DressedGarment> garments;
};

/// apply_shape, then each garment is pushed outside the shaped body by its
/// own epsilon and takes the body's weights by nearest vertex.
DressedAvatar dress(const assets::BodyAsset& body, const shape::ShapeWeights& weights,
                    const std::vector<const skin::GarmentAsset*>& garments);

struct PosedAvatar {
  Mesh body;
  std::vector<Mesh> garments;
  std::vector<Vec3> joints; // world positions
};

PosedAvatar pose(const DressedAvatar& avatar, const skin::SkinBinding& bodyBinding,
                 const Pose& pose);

inline constexpr std::uint32_t kGarmentLabelBase = retarget::kBodyGroupCount;

/// Body vertices get the body group of their dominant joint; garment `k`
/// vertices get kGarmentLabelBase + garmentLabels[k].
std::vector<std::uint32_t> segmentation(const DressedAvatar& avatar,
                                        const skin::SkinBinding& bodyBinding,
                                        const std::vector<std::uint32_t>& garmentLabels);

} // namespace avf::pipeline
