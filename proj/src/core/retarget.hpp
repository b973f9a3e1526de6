#pragma once

#include "bone_names.hpp"
#include "bvh.hpp"
#include "error.hpp"
#include "geometry.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace avf::retarget {

struct BonePair {
  std::size_t source;
  std::size_t target;

  bool operator==(const BonePair&) const = default;
};

/// Name-level options, usually loaded from a map file.
struct MapOptions {
  std::vector<std::pair<std::string, std::string>> overrides; // (source, target)
  AliasTable aliases = AliasTable::builtin();
  std::map<std::string, std::string> primaryChild; // joint name -> child name
};

/// Map file: {"overrides": [{"source": .., "target": ..}] or {"src": "tgt"},
///            "aliases": {"key": ["name", ..]},
///            "primary_child": {"joint": "child"}}
MapOptions parseMapOptions(const std::string& jsonText);
MapOptions loadMapOptions(const std::filesystem::path& path);

struct RetargetMap {
  double scale = 1.0;
  std::vector<BonePair> pairs; // sorted by target index
  std::vector<Quat> alignments; // one per pair: takes the source rest frame onto the target's
  std::vector<std::size_t> unmappedTarget;
  std::vector<std::string> warnings;
  Skeleton source;
  Skeleton target;
};

/// Target height over source height, measured as the vertical extent of the
/// rest joint cloud (end sites included). Falls back to the total bone length
/// ratio when either extent is below 1e-6.
double computeScale(const Skeleton& source, const Skeleton& target);

struct BoneMapping {
  std::vector<BonePair> pairs; // sorted by target index
  std::vector<std::size_t> unmappedTarget;
};

/// Mandatory target keys nothing in the source maps onto.
class UnmappedBonesError : public Error {
 public:
  explicit UnmappedBonesError(std::vector<std::string> missing);

  const std::vector<std::string>& missing() const noexcept {
    return missing_;
  }

 private:
  std::vector<std::string> missing_;
};

/// Pairs joints by priority: roots, explicit overrides, exact normalized name,
/// alias key (best alias rank, then document order), and finally the
/// structural spine top. Throws UnmappedBonesError listing every missing
/// mandatory key, or Conflict on a duplicate override.
BoneMapping mapBones(const Skeleton& source, const Skeleton& target, const MapOptions& options);

/// Rest-frame change of basis per pair. The frame's primary axis points at
/// the bone's primary child (first child, skipping through zero-length links,
/// end site for leaves, or the map's
/// primary_child override); the secondary axis is world up made
/// perpendicular, or world X when up is parallel within 1e-6.
std::vector<Quat> computeAlignments(const Skeleton& source, const Skeleton& target,
                                    const std::vector<BonePair>& pairs,
                                    const std::map<std::string, std::string>& primaryChild = {});

/// Rest-pose world frame of one joint (columns: primary, secondary, third).
Mat3 restFrame(const Skeleton& skeleton, std::size_t joint,
               const std::map<std::string, std::string>& primaryChild = {});

RetargetMap buildRetargetMap(const Skeleton& source, const Skeleton& target,
                             const MapOptions& options = {});

/// One source pose onto the target. Each mapped target joint gets the world
/// rotation G_source * A^-1; the local rotation is taken relative to the
/// target parent's world rotation, which makes
///   L_target = A_parent * L_source * A^-1
/// with A_parent the nearest mapped ancestor's alignment (identity above the
/// root). Unmapped joints keep identity. The target root's world position
/// is the source root's world position (rest offset plus translation) times
/// the scale.
Pose retargetPose(const Pose& sourcePose, const RetargetMap& map);

struct RetargetedClip {
  Skeleton skeleton;
  double frameTime = 0.0;
  std::vector<Pose> poses;
};

/// Throws Error(Conflict) when the map was built for a different skeleton.
RetargetedClip retargetClip(const bvh::MotionClip& clip, const Skeleton& target,
                            const RetargetMap& map);

// Pose binary: "AVPOSE\0\0", u32 version 1, u32 joints, u32 frames,
// f32 frame_time, then per frame f32 root translation[3] followed by
// f32 (w, x, y, z) per joint.
std::vector<std::uint8_t> encodePoseBinary(const RetargetedClip& clip);
RetargetedClip decodePoseBinary(std::span<const std::uint8_t> bytes, const Skeleton& skeleton);

/// Skeleton file: {"joints": [{"name", "parent", "offset": [x,y,z],
/// "end_site": [x,y,z] | null}]}. Parent is an index or -1.
std::string skeletonToJson(const Skeleton& skeleton);
Skeleton skeletonFromJson(const std::string& text);
/// `.bvh` files contribute their hierarchy; anything else is read as JSON.
Skeleton loadSkeleton(const std::filesystem::path& path);

} // namespace avf::retarget
