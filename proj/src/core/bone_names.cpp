#include "bone_names.hpp"

#include <map>

namespace avf::retarget {

namespace {

std::string replaceAll(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// "%LEFT%" expands to left/right, "%L%" to l/r.
std::vector<std::string> sided(const std::vector<std::string>& templates, bool left) {
  std::vector<std::string> out;
  for (const std::string& t : templates) {
    out.push_back(replaceAll(replaceAll(t, "%LEFT%", left ? "left" : "right"), "%L%",
                             left ? "l" : "r"));
  }
  return out;
}

} // namespace

AliasTable AliasTable::builtin() {
  AliasTable t;
  t.entries_.push_back({"hips", {"hips", "pelvis", "root", "hip", "bip01pelvis"}});
  t.entries_.push_back({"spine", {"spine", "spine01", "lowerback", "abdomen", "bip01spine"}});
  t.entries_.push_back(
      {"chest", {"chest", "spine2", "upperchest", "spine03", "thorax", "chest1", "spine3"}});
  t.entries_.push_back({"neck", {"neck", "neck1", "neck01", "lowerneck"}});
  t.entries_.push_back({"head", {"head", "head01", "bip01head"}});

  const std::vector<std::pair<std::string, std::vector<std::string>>> sidedEntries = {
      {"clavicle",
       {"%LEFT%shoulder", "clavicle%L%", "shoulder%L%", "%L%shoulder", "%L%collar",
        "%LEFT%collar", "%L%clavicle"}},
      {"upperarm",
       {"%LEFT%arm", "upperarm%L%", "%L%shldr", "%L%humerus", "%L%uparm", "%LEFT%uparm", "arm%L%",
        "%L%upperarm", "upperarm01%L%"}},
      {"lowerarm",
       {"%LEFT%forearm", "lowerarm%L%", "forearm%L%", "%L%forearm", "%L%elbow", "lowerarm01%L%",
        "%L%radius", "%LEFT%lowerarm"}},
      {"hand", {"%LEFT%hand", "hand%L%", "%L%hand", "%L%wrist", "wrist%L%"}},
      {"upperleg",
       {"%LEFT%upleg", "thigh%L%", "upperleg%L%", "%L%thigh", "%LEFT%upperleg", "%L%femur",
        "upperleg01%L%", "%L%hip", "%L%hipjoint"}},
      {"lowerleg",
       {"%LEFT%leg", "shin%L%", "lowerleg%L%", "calf%L%", "%L%shin", "%L%knee", "%LEFT%lowerleg",
        "%L%tibia", "lowerleg01%L%"}},
      {"foot", {"%LEFT%foot", "foot%L%", "%L%foot", "%L%ankle", "ankle%L%"}},
      {"toe",
       {"%LEFT%toebase", "toe%L%", "%L%toe", "toebase%L%", "%LEFT%toe", "%L%toes", "toes%L%"}},
  };
  for (const auto& [base, templates] : sidedEntries) {
    t.entries_.push_back({base + "_l", sided(templates, true)});
    t.entries_.push_back({base + "_r", sided(templates, false)});
  }
  return t;
}

void AliasTable::add(const std::string& key, const std::vector<std::string>& aliases) {
  std::vector<std::string> normalized;
  for (const std::string& a : aliases) {
    normalized.push_back(normalizeJointName(a));
  }
  for (AliasEntry& e : entries_) {
    if (e.key == key) {
      e.aliases.insert(e.aliases.begin(), normalized.begin(), normalized.end());
      return;
    }
  }
  entries_.push_back({key, std::move(normalized)});
}

std::optional<AliasTable::Match> AliasTable::classify(std::string_view jointName) const {
  const auto colon = jointName.rfind(':');
  const std::string candidates[2] = {
      normalizeJointName(jointName),
      colon == std::string_view::npos ? std::string() : normalizeJointName(jointName.substr(colon + 1)),
  };
  for (const std::string& name : candidates) {
    if (name.empty()) {
      continue;
    }
    for (const AliasEntry& e : entries_) {
      for (std::size_t r = 0; r < e.aliases.size(); ++r) {
        if (e.aliases[r] == name) {
          return Match{e.key, r};
        }
      }
    }
  }
  return std::nullopt;
}

const std::vector<std::string>& mandatoryKeys() {
  static const std::vector<std::string> keys = {
      "hips",       "chest",      "head",       "upperarm_l", "upperarm_r", "lowerarm_l",
      "lowerarm_r", "upperleg_l", "upperleg_r", "lowerleg_l", "lowerleg_r"};
  return keys;
}

const char* bodyGroupName(BodyGroup g) {
  static const char* names[kBodyGroupCount] = {
      "head",           "torso",          "upper_arm_left", "upper_arm_right", "lower_arm_left",
      "lower_arm_right", "hand_left",     "hand_right",     "upper_leg_left",  "upper_leg_right",
      "lower_leg_left", "lower_leg_right", "foot_left",     "foot_right"};
  const int i = static_cast<int>(g);
  return i >= 0 && i < kBodyGroupCount ? names[i] : "unknown";
}

namespace {

std::optional<BodyGroup> groupForKey(const std::string& key) {
  static const std::map<std::string, BodyGroup> table = {
      {"head", BodyGroup::Head},
      {"neck", BodyGroup::Head},
      {"hips", BodyGroup::Torso},
      {"spine", BodyGroup::Torso},
      {"chest", BodyGroup::Torso},
      {"clavicle_l", BodyGroup::Torso},
      {"clavicle_r", BodyGroup::Torso},
      {"upperarm_l", BodyGroup::UpperArmLeft},
      {"upperarm_r", BodyGroup::UpperArmRight},
      {"lowerarm_l", BodyGroup::LowerArmLeft},
      {"lowerarm_r", BodyGroup::LowerArmRight},
      {"hand_l", BodyGroup::HandLeft},
      {"hand_r", BodyGroup::HandRight},
      {"upperleg_l", BodyGroup::UpperLegLeft},
      {"upperleg_r", BodyGroup::UpperLegRight},
      {"lowerleg_l", BodyGroup::LowerLegLeft},
      {"lowerleg_r", BodyGroup::LowerLegRight},
      {"foot_l", BodyGroup::FootLeft},
      {"foot_r", BodyGroup::FootRight},
      {"toe_l", BodyGroup::FootLeft},
      {"toe_r", BodyGroup::FootRight},
  };
  const auto it = table.find(key);
  if (it == table.end()) {
    return std::nullopt;
  }
  return it->second;
}

} // namespace

std::vector<BodyGroup> bodyGroups(const Skeleton& skeleton, const AliasTable& table) {
  std::vector<BodyGroup> groups(skeleton.size(), BodyGroup::Torso);
  for (std::size_t k = 0; k < skeleton.size(); ++k) {
    const Joint& j = skeleton.joint(k);
    std::optional<BodyGroup> g;
    if (const auto m = table.classify(j.name)) {
      g = groupForKey(m->key);
    }
    if (g) {
      groups[k] = *g;
    } else if (j.parent >= 0) {
      groups[k] = groups[j.parent];
    }
  }
  return groups;
}

std::optional<std::size_t> spineTop(const Skeleton& skeleton, const AliasTable& table) {
  std::optional<std::size_t> head;
  std::optional<std::size_t> armL;
  std::optional<std::size_t> armR;
  for (std::size_t k = 0; k < skeleton.size(); ++k) {
    const auto m = table.classify(skeleton.joint(k).name);
    if (!m) {
      continue;
    }
    if (m->key == "head" && !head) {
      head = k;
    } else if (m->key == "upperarm_l" && !armL) {
      armL = k;
    } else if (m->key == "upperarm_r" && !armR) {
      armR = k;
    }
  }
  if (!head || !armL || !armR) {
    return std::nullopt;
  }
  auto ancestors = [&](std::size_t k) {
    std::vector<bool> mark(skeleton.size(), false);
    for (int j = static_cast<int>(k); j >= 0; j = skeleton.joint(j).parent) {
      mark[j] = true;
    }
    return mark;
  };
  const auto a = ancestors(*head);
  const auto b = ancestors(*armL);
  const auto c = ancestors(*armR);
  // Deepest joint marked in all three; parents precede children.
  for (std::size_t k = skeleton.size(); k-- > 0;) {
    if (a[k] && b[k] && c[k] && k != *head) {
      return k;
    }
  }
  return std::nullopt;
}

} // namespace avf::retarget
