#pragma once

#include "geometry.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace avf::retarget {

/// Canonical bone keys shared by every rig convention we recognise.
/// Names like "hips", "chest", "head", "upperarm_l", "lowerleg_r".
struct AliasEntry {
  std::string key;
  std::vector<std::string> aliases; // normalized; earlier entries win ties
};

class AliasTable {
 public:
  /// Hips/pelvis/root, spine, chest, neck, head and both sides of the
  /// clavicle, arm, hand, leg, foot and toe chains for common rigs.
  static AliasTable builtin();

  /// Prepends `aliases` to the entry for `key`, creating it if needed.
  void add(const std::string& key, const std::vector<std::string>& aliases);

  struct Match {
    std::string key;
    std::size_t rank; // position in the alias list
  };
  /// Classifies a joint name; a namespace prefix ("rig:Hips") is ignored.
  std::optional<Match> classify(std::string_view jointName) const;

  const std::vector<AliasEntry>& entries() const {
    return entries_;
  }

 private:
  std::vector<AliasEntry> entries_;
};

/// Bones that must be paired for a retarget to be accepted.
const std::vector<std::string>& mandatoryKeys();

/// The 14 body-part groups used for segmentation labels.
enum class BodyGroup : int {
  Head = 0,
  Torso,
  UpperArmLeft,
  UpperArmRight,
  LowerArmLeft,
  LowerArmRight,
  HandLeft,
  HandRight,
  UpperLegLeft,
  UpperLegRight,
  LowerLegLeft,
  LowerLegRight,
  FootLeft,
  FootRight,
};
inline constexpr int kBodyGroupCount = 14;

const char* bodyGroupName(BodyGroup g);

/// Group of every joint: its own key if classified, otherwise the nearest
/// classified ancestor's, otherwise Torso.
std::vector<BodyGroup> bodyGroups(const Skeleton& skeleton, const AliasTable& table);

/// Lowest common ancestor of the head and both upper arms, when all exist.
std::optional<std::size_t> spineTop(const Skeleton& skeleton, const AliasTable& table);

} // namespace avf::retarget
