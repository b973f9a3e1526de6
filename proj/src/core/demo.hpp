#pragma once

#include "bvh.hpp"
#include "shape_model.hpp"
#include "skin.hpp"

#include <filesystem>
#include <string>
#include <vector>

// Small synthetic asset set: a capsule-like humanoid body, a semantic
// attribute corpus, three garments and two motion clips on a foreign rig.
namespace avf::demo {

/// 22 joints, meters, Y-up, facing +Z, character left on +X.
Skeleton bodySkeleton();

struct Body {
  Mesh rest;
  skin::SkinBinding binding;
};

/// Union of closed ellipsoids along the bones, weights blended across joints.
Body body(const Skeleton& skeleton, int subdivisions = 2);

/// Seven attribute subsets (arm_length, belly, height, hips, leg_length,
/// shoulders, weight; sorted as a corpus directory would be),
/// `samplesPerAttribute` meshes each.
std::vector<shape::AttributeSubset> attributeCorpus(const Mesh& rest, const Skeleton& skeleton,
                                                    int samplesPerAttribute = 6,
                                                    unsigned seed = 7);

struct GarmentSpec {
  std::string id;
  std::string name;
  Mesh cloth; // unprepared, rest pose
};

/// shirt, skirt and scarf as open tubes around the rest body.
std::vector<GarmentSpec> garments(const Skeleton& skeleton);

/// CMU-style rig in inch-like units (LHipJoint, LowerBack, Spine1, ...).
Skeleton mocapSkeleton();

/// "walk" or "wave"; `frames` rows at 30 fps.
bvh::MotionClip motion(const std::string& kind, std::size_t frames);

/// Map options the demo motions need: the mocap hips frame points at Spine.
std::string motionMapJson();

/// 1x1 PNG.
const std::vector<std::uint8_t>& placeholderPng();

/// Writes a complete asset library (asset.json manifests) under `dir`.
/// With `corpusDir` set, the OBJ corpus and rest mesh go there as well.
void writeLibrary(const std::filesystem::path& dir,
                  const std::filesystem::path& corpusDir = {});

} // namespace avf::demo
