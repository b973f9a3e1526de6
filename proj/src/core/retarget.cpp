#include "retarget.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace avf::retarget {

namespace {

std::string joinNames(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& m : names) {
    out += (out.empty() ? "" : ", ") + m;
  }
  return out;
}

} // namespace

UnmappedBonesError::UnmappedBonesError(std::vector<std::string> missing)
    : Error(ErrorCode::UnmappedBone, "unmapped mandatory bones: " + joinNames(missing)),
      missing_(std::move(missing)) {}

using nlohmann::json;

MapOptions parseMapOptions(const std::string& jsonText) {
  MapOptions opts;
  try {
    const json j = json::parse(jsonText);
    if (!j.is_object()) {
      throw Error(ErrorCode::Parse, "map file must be a JSON object");
    }
    if (j.contains("overrides")) {
      const json& o = j.at("overrides");
      if (o.is_array()) {
        for (const json& p : o) {
          opts.overrides.emplace_back(p.at("source").get<std::string>(),
                                      p.at("target").get<std::string>());
        }
      } else if (o.is_object()) {
        for (const auto& [src, tgt] : o.items()) {
          opts.overrides.emplace_back(src, tgt.get<std::string>());
        }
      } else {
        throw Error(ErrorCode::Parse, "'overrides' must be an array or object");
      }
    }
    if (j.contains("aliases")) {
      for (const auto& [key, names] : j.at("aliases").items()) {
        opts.aliases.add(key, names.get<std::vector<std::string>>());
      }
    }
    if (j.contains("primary_child")) {
      for (const auto& [joint, child] : j.at("primary_child").items()) {
        opts.primaryChild[joint] = child.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("map file: ") + e.what());
  }
  return opts;
}

MapOptions loadMapOptions(const std::filesystem::path& path) {
  return parseMapOptions(readFileText(path));
}

double computeScale(const Skeleton& source, const Skeleton& target) {
  const double srcLen = source.totalBoneLength();
  const double tgtLen = target.totalBoneLength();
  if (source.empty() || target.empty() || !(srcLen > 0.0) || !(tgtLen > 0.0)) {
    throw Error(ErrorCode::Degenerate, "cannot scale a zero-size skeleton");
  }
  auto extent = [](const Skeleton& s) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Vec3& p : s.restPointCloud()) {
      lo = std::min(lo, p.y());
      hi = std::max(hi, p.y());
    }
    return hi - lo;
  };
  const double srcHeight = extent(source);
  const double tgtHeight = extent(target);
  if (srcHeight < 1e-6 || tgtHeight < 1e-6) {
    return tgtLen / srcLen;
  }
  return tgtHeight / srcHeight;
}

BoneMapping mapBones(const Skeleton& source, const Skeleton& target, const MapOptions& options) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> targetToSource(target.size(), kNone);
  std::vector<std::size_t> sourceToTarget(source.size(), kNone);
  auto pair = [&](std::size_t s, std::size_t t) {
    targetToSource[t] = s;
    sourceToTarget[s] = t;
  };

  for (const auto& [srcName, tgtName] : options.overrides) {
    const auto s = source.find(srcName);
    const auto t = target.find(tgtName);
    if (!s) {
      throw Error(ErrorCode::NotFound, "override names unknown source joint '" + srcName + "'");
    }
    if (!t) {
      throw Error(ErrorCode::NotFound, "override names unknown target joint '" + tgtName + "'");
    }
    if (sourceToTarget[*s] != kNone || targetToSource[*t] != kNone) {
      throw Error(ErrorCode::Conflict,
                  "duplicate override involving '" + srcName + "' -> '" + tgtName + "'");
    }
    pair(*s, *t);
  }

  if (targetToSource[0] != 0 || sourceToTarget[0] != 0) {
    if (targetToSource[0] != kNone || sourceToTarget[0] != kNone) {
      throw Error(ErrorCode::Conflict, "overrides must pair the two root joints together");
    }
    pair(0, 0);
  }

  for (std::size_t t = 0; t < target.size(); ++t) {
    if (targetToSource[t] != kNone) {
      continue;
    }
    const std::string key = normalizeJointName(target.joint(t).name);
    for (std::size_t s = 0; s < source.size(); ++s) {
      if (sourceToTarget[s] == kNone && normalizeJointName(source.joint(s).name) == key) {
        pair(s, t);
        break;
      }
    }
  }

  std::vector<std::optional<AliasTable::Match>> sourceKeys(source.size());
  for (std::size_t s = 0; s < source.size(); ++s) {
    sourceKeys[s] = options.aliases.classify(source.joint(s).name);
  }
  std::vector<std::optional<AliasTable::Match>> targetKeys(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    targetKeys[t] = options.aliases.classify(target.joint(t).name);
  }
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (targetToSource[t] != kNone || !targetKeys[t]) {
      continue;
    }
    std::size_t best = kNone;
    for (std::size_t s = 0; s < source.size(); ++s) {
      if (sourceToTarget[s] != kNone || !sourceKeys[s] || sourceKeys[s]->key != targetKeys[t]->key) {
        continue;
      }
      if (best == kNone || sourceKeys[s]->rank < sourceKeys[best]->rank) {
        best = s;
      }
    }
    if (best != kNone) {
      pair(best, t);
    }
  }

  const auto srcTop = spineTop(source, options.aliases);
  const auto tgtTop = spineTop(target, options.aliases);
  if (srcTop && tgtTop && targetToSource[*tgtTop] == kNone && sourceToTarget[*srcTop] == kNone) {
    pair(*srcTop, *tgtTop);
  }

  std::vector<std::string> missing;
  for (const std::string& key : mandatoryKeys()) {
    bool satisfied = false;
    for (std::size_t t = 0; t < target.size() && !satisfied; ++t) {
      bool candidate = targetKeys[t] && targetKeys[t]->key == key;
      candidate = candidate || (key == "hips" && t == 0) || (key == "chest" && tgtTop && t == *tgtTop);
      satisfied = candidate && targetToSource[t] != kNone;
    }
    if (!satisfied) {
      missing.push_back(key);
    }
  }
  if (!missing.empty()) {
    throw UnmappedBonesError(std::move(missing));
  }

  BoneMapping out;
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (targetToSource[t] == kNone) {
      out.unmappedTarget.push_back(t);
    } else {
      out.pairs.push_back({targetToSource[t], t});
    }
  }
  return out;
}

namespace {

std::optional<std::size_t> overrideChild(const Skeleton& skeleton, std::size_t joint,
                                         const std::map<std::string, std::string>& primaryChild) {
  const std::string& name = skeleton.joint(joint).name;
  for (const auto& [jointName, childName] : primaryChild) {
    if (jointName == name || normalizeJointName(jointName) == normalizeJointName(name)) {
      // Entries naming a child this skeleton lacks belong to the other rig.
      return skeleton.find(childName);
    }
  }
  return std::nullopt;
}

} // namespace

Mat3 restFrame(const Skeleton& skeleton, std::size_t joint,
               const std::map<std::string, std::string>& primaryChild) {
  const std::vector<Vec3> rest = skeleton.restPositions();
  Vec3 dir = Vec3::Zero();
  if (const auto child = overrideChild(skeleton, joint, primaryChild)) {
    dir = rest[*child] - rest[joint];
  } else {
    // First child in document order; zero-length links are followed down
    // their own first-child chain.
    std::size_t cur = joint;
    while (dir.norm() < 1e-9) {
      const auto kids = skeleton.children(cur);
      if (kids.empty()) {
        if (skeleton.joint(cur).endSite) {
          dir = rest[cur] + *skeleton.joint(cur).endSite - rest[joint];
        }
        break;
      }
      cur = kids.front();
      dir = rest[cur] - rest[joint];
    }
    if (dir.norm() < 1e-9 && cur == joint && skeleton.joint(joint).parent >= 0) {
      dir = skeleton.joint(joint).restOffset;
    }
  }
  const double len = dir.norm();
  if (len < 1e-9) {
    throw Error(ErrorCode::Degenerate, "zero-length bone at '" + skeleton.joint(joint).name + "'");
  }
  const Vec3 primary = dir / len;
  Vec3 secondary = Vec3::UnitY() - primary.y() * primary;
  if (secondary.norm() < 1e-6) {
    secondary = Vec3::UnitX() - primary.x() * primary;
  }
  secondary.normalize();
  Mat3 frame;
  frame.col(0) = primary;
  frame.col(1) = secondary;
  frame.col(2) = primary.cross(secondary);
  return frame;
}

std::vector<Quat> computeAlignments(const Skeleton& source, const Skeleton& target,
                                    const std::vector<BonePair>& pairs,
                                    const std::map<std::string, std::string>& primaryChild) {
  std::vector<Quat> out;
  out.reserve(pairs.size());
  for (const BonePair& p : pairs) {
    const Mat3 fs = restFrame(source, p.source, primaryChild);
    const Mat3 ft = restFrame(target, p.target, primaryChild);
    out.push_back(canonicalQuat(Quat(Mat3(ft * fs.transpose()))));
  }
  return out;
}

RetargetMap buildRetargetMap(const Skeleton& source, const Skeleton& target,
                             const MapOptions& options) {
  for (const auto& [jointName, childName] : options.primaryChild) {
    const bool inSource = source.find(jointName) && source.find(childName);
    const bool inTarget = target.find(jointName) && target.find(childName);
    if (!inSource && !inTarget) {
      throw Error(ErrorCode::NotFound, "primary_child entry '" + jointName + "' -> '" + childName +
                                           "' matches neither skeleton");
    }
  }
  RetargetMap map;
  map.scale = computeScale(source, target);
  BoneMapping mapping = mapBones(source, target, options);
  map.alignments = computeAlignments(source, target, mapping.pairs, options.primaryChild);
  map.pairs = std::move(mapping.pairs);
  map.unmappedTarget = std::move(mapping.unmappedTarget);
  for (std::size_t t : map.unmappedTarget) {
    map.warnings.push_back("target joint '" + target.joint(t).name + "' has no source; held at rest");
  }
  map.source = source;
  map.target = target;
  return map;
}

Pose retargetPose(const Pose& sourcePose, const RetargetMap& map) {
  checkPoseMatches(map.source, sourcePose);
  const Skeleton& src = map.source;
  const Skeleton& tgt = map.target;

  std::vector<Quat> sourceWorld(src.size());
  for (std::size_t k = 0; k < src.size(); ++k) {
    const int parent = src.joint(k).parent;
    sourceWorld[k] = parent < 0 ? sourcePose.localRotations[k]
                                : Quat(sourceWorld[parent] * sourcePose.localRotations[k]);
  }

  std::vector<int> pairOfTarget(tgt.size(), -1);
  for (std::size_t i = 0; i < map.pairs.size(); ++i) {
    pairOfTarget[map.pairs[i].target] = static_cast<int>(i);
  }

  Pose out = Pose::identity(tgt.size());
  std::vector<Quat> targetWorld(tgt.size(), Quat::Identity());
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    const int parent = tgt.joint(k).parent;
    const Quat parentWorld = parent < 0 ? Quat::Identity() : targetWorld[parent];
    const int p = pairOfTarget[k];
    if (p < 0) {
      targetWorld[k] = parentWorld;
      continue;
    }
    const Quat world = (sourceWorld[map.pairs[p].source] * map.alignments[p].conjugate()).normalized();
    out.localRotations[k] = canonicalQuat(parentWorld.conjugate() * world);
    targetWorld[k] = world;
  }
  const Vec3 sourceRoot = src.joint(0).restOffset + sourcePose.rootTranslation;
  out.rootTranslation = map.scale * sourceRoot - tgt.joint(0).restOffset;
  return out;
}

RetargetedClip retargetClip(const bvh::MotionClip& clip, const Skeleton& target,
                            const RetargetMap& map) {
  if (!(map.source == clip.skeleton) || !(map.target == target)) {
    throw Error(ErrorCode::Conflict, "retarget map was built for different skeletons (stale map)");
  }
  RetargetedClip out;
  out.skeleton = target;
  out.frameTime = clip.frameTime;
  out.poses.reserve(clip.frameCount());
  for (std::size_t f = 0; f < clip.frameCount(); ++f) {
    out.poses.push_back(retargetPose(bvh::poseAtFrame(clip, f), map));
  }
  return out;
}

namespace {

constexpr char kPoseMagic[8] = {'A', 'V', 'P', 'O', 'S', 'E', '\0', '\0'};

} // namespace

std::vector<std::uint8_t> encodePoseBinary(const RetargetedClip& clip) {
  ByteWriter w;
  w.raw(std::string_view(kPoseMagic, sizeof(kPoseMagic)));
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(clip.skeleton.size()));
  w.u32(static_cast<std::uint32_t>(clip.poses.size()));
  w.f32(static_cast<float>(clip.frameTime));
  for (const Pose& p : clip.poses) {
    checkPoseMatches(clip.skeleton, p);
    for (int c = 0; c < 3; ++c) {
      w.f32(static_cast<float>(p.rootTranslation[c]));
    }
    for (const Quat& q : p.localRotations) {
      w.f32(static_cast<float>(q.w()));
      w.f32(static_cast<float>(q.x()));
      w.f32(static_cast<float>(q.y()));
      w.f32(static_cast<float>(q.z()));
    }
  }
  return w.take();
}

RetargetedClip decodePoseBinary(std::span<const std::uint8_t> bytes, const Skeleton& skeleton) {
  ByteReader r(bytes);
  if (r.string(sizeof(kPoseMagic)) != std::string_view(kPoseMagic, sizeof(kPoseMagic))) {
    throw Error(ErrorCode::Parse, "not a pose binary (bad magic)");
  }
  if (r.u32() != 1) {
    throw Error(ErrorCode::Parse, "unsupported pose binary version");
  }
  const std::uint32_t joints = r.u32();
  const std::uint32_t frames = r.u32();
  if (joints != skeleton.size()) {
    throw Error(ErrorCode::Dimension, "pose binary joint count does not match skeleton");
  }
  RetargetedClip out;
  out.skeleton = skeleton;
  out.frameTime = r.f32();
  r.expectAtLeast(frames, 12 + 16ull * joints);
  for (std::uint32_t f = 0; f < frames; ++f) {
    Pose p = Pose::identity(joints);
    p.rootTranslation = r.vec3f();
    for (Quat& q : p.localRotations) {
      const double w = r.f32();
      const double x = r.f32();
      const double y = r.f32();
      const double z = r.f32();
      q = Quat(w, x, y, z);
    }
    out.poses.push_back(std::move(p));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::Parse, "trailing bytes after pose data");
  }
  return out;
}

std::string skeletonToJson(const Skeleton& skeleton) {
  json joints = json::array();
  for (const Joint& j : skeleton.joints()) {
    json e = {{"name", j.name},
              {"parent", j.parent},
              {"offset", {j.restOffset.x(), j.restOffset.y(), j.restOffset.z()}}};
    e["end_site"] = j.endSite ? json{j.endSite->x(), j.endSite->y(), j.endSite->z()} : json(nullptr);
    joints.push_back(std::move(e));
  }
  return json{{"joints", std::move(joints)}}.dump(1);
}

Skeleton skeletonFromJson(const std::string& text) {
  std::vector<Joint> joints;
  try {
    const json j = json::parse(text);
    for (const json& e : j.at("joints")) {
      Joint joint;
      joint.name = e.at("name").get<std::string>();
      joint.parent = e.at("parent").get<int>();
      const auto o = e.at("offset").get<std::vector<double>>();
      if (o.size() != 3) {
        throw Error(ErrorCode::Parse, "joint offset must have 3 components");
      }
      joint.restOffset = Vec3(o[0], o[1], o[2]);
      if (e.contains("end_site") && !e.at("end_site").is_null()) {
        const auto s = e.at("end_site").get<std::vector<double>>();
        if (s.size() != 3) {
          throw Error(ErrorCode::Parse, "end site must have 3 components");
        }
        joint.endSite = Vec3(s[0], s[1], s[2]);
      }
      joints.push_back(std::move(joint));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("skeleton json: ") + e.what());
  }
  return Skeleton(std::move(joints));
}

Skeleton loadSkeleton(const std::filesystem::path& path) {
  if (path.extension() == ".bvh" || path.extension() == ".BVH") {
    return bvh::loadBvh(path).skeleton;
  }
  return skeletonFromJson(readFileText(path));
}

} // namespace avf::retarget
