#include "bvh_corpus.hpp"
#include "error.hpp"
#include "retarget.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace avf;
using namespace avf::retarget;

namespace {

Skeleton transformed(const Skeleton& s, const Quat& r, double scale = 1.0) {
  std::vector<Joint> joints = s.joints();
  for (Joint& j : joints) {
    j.restOffset = scale * (r * j.restOffset);
    if (j.endSite) {
      j.endSite = scale * (r * *j.endSite);
    }
  }
  return Skeleton(joints);
}

Skeleton verticalChain(const std::vector<double>& lengths) {
  std::vector<Joint> joints{Joint{"root", -1, Vec3::Zero(), {}}};
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    joints.push_back(Joint{"j" + std::to_string(i), static_cast<int>(i), Vec3(0, lengths[i], 0), {}});
  }
  return Skeleton(joints);
}

RetargetMap manualMap(const Skeleton& s, const Skeleton& t, std::vector<BonePair> pairs) {
  RetargetMap map;
  map.scale = computeScale(s, t);
  map.alignments = computeAlignments(s, t, pairs);
  map.pairs = std::move(pairs);
  map.source = s;
  map.target = t;
  return map;
}

std::vector<Pose> randomPoses(const Skeleton& s, std::size_t n, std::mt19937_64& rng) {
  std::vector<Pose> poses;
  for (std::size_t f = 0; f < n; ++f) {
    poses.push_back(test::randomPose(s, rng));
  }
  return poses;
}

} // namespace

TEST(ComputeScale, Identity) {
  const Skeleton s = test::humanoid();
  EXPECT_EQ(computeScale(s, s), 1.0);
}

TEST(ComputeScale, UniformlyScaled) {
  const Skeleton s = test::humanoid();
  EXPECT_NEAR(computeScale(s, s.scaled(2.0)), 2.0, 1e-9);
}

TEST(ComputeScale, VerticalChains) {
  EXPECT_NEAR(computeScale(verticalChain({1.0}), verticalChain({1.0, 0.8})), 1.8, 1e-9);
}

TEST(ComputeScale, FlatFallsBackToBoneLength) {
  const Skeleton a({Joint{"r", -1, Vec3::Zero(), {}}, Joint{"c", 0, Vec3(1, 0, 0), {}}});
  const Skeleton b({Joint{"r", -1, Vec3::Zero(), {}}, Joint{"c", 0, Vec3(0, 0, 3), {}}});
  EXPECT_NEAR(computeScale(a, b), 3.0, 1e-12);
  const Skeleton zero({Joint{"r", -1, Vec3::Zero(), {}}});
  try {
    computeScale(zero, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(MapBones, IdenticalSkeletonsPairNamesakes) {
  const Skeleton s = test::humanoid();
  const BoneMapping m = mapBones(s, s, {});
  ASSERT_EQ(m.pairs.size(), s.size());
  for (const BonePair& p : m.pairs) {
    EXPECT_EQ(p.source, p.target);
  }
  EXPECT_TRUE(m.unmappedTarget.empty());
}

TEST(MapBones, AliasTablePairsAcrossConventions) {
  const Skeleton src = test::humanoid(true);
  const Skeleton tgt = test::humanoid(false);
  const BoneMapping m = mapBones(src, tgt, {});
  EXPECT_TRUE(m.unmappedTarget.empty());
  const std::size_t thigh = *tgt.find("thigh_l");
  bool found = false;
  for (const BonePair& p : m.pairs) {
    if (p.target == thigh) {
      EXPECT_EQ(src.joint(p.source).name, "LeftUpLeg");
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(MapBones, DottedBlenderNames) {
  const Skeleton src = test::humanoid(true);
  std::vector<Joint> joints = test::humanoid(false).joints();
  for (Joint& j : joints) {
    if (j.name == "thigh_l") {
      j.name = "thigh.L";
    }
  }
  const Skeleton tgt(joints);
  const BoneMapping m = mapBones(src, tgt, {});
  for (const BonePair& p : m.pairs) {
    if (tgt.joint(p.target).name == "thigh.L") {
      EXPECT_EQ(src.joint(p.source).name, "LeftUpLeg");
    }
  }
}

TEST(MapBones, MissingHeadIsReported) {
  std::vector<Joint> joints = test::humanoid().joints();
  const int head = static_cast<int>(*test::humanoid().find("Head"));
  joints.erase(joints.begin() + head);
  for (Joint& j : joints) {
    if (j.parent > head) {
      --j.parent;
    }
  }
  const Skeleton headless(joints);
  try {
    mapBones(headless, test::humanoid(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnmappedBone);
    EXPECT_NE(std::string(e.what()).find("head"), std::string::npos);
  }
}

TEST(MapBones, OverridesWinAndDuplicatesConflict) {
  const Skeleton s = test::humanoid();
  MapOptions opts;
  opts.overrides = {{"LeftArm", "LeftArm"}, {"LeftForeArm", "LeftArm"}};
  try {
    mapBones(s, s, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Conflict);
  }
  opts.overrides = {{"LeftHand", "RightHand"}, {"RightHand", "LeftHand"}};
  const BoneMapping m = mapBones(s, s, opts);
  for (const BonePair& p : m.pairs) {
    if (s.joint(p.target).name == "RightHand") {
      EXPECT_EQ(s.joint(p.source).name, "LeftHand");
    }
  }
}

TEST(MapBones, CmuRigOntoGameRig) {
  const bvh::MotionClip clip = bvh::loadBvh(test::fixtureDir() / "bvh" / "cmu_style.bvh");
  const Skeleton tgt = test::humanoid(false);
  const BoneMapping m = mapBones(clip.skeleton, tgt, {});
  std::map<std::string, std::string> byTarget;
  for (const BonePair& p : m.pairs) {
    byTarget[tgt.joint(p.target).name] = clip.skeleton.joint(p.source).name;
  }
  EXPECT_EQ(byTarget["pelvis"], "Hips");
  EXPECT_EQ(byTarget["spine_01"], "Spine");
  EXPECT_EQ(byTarget["spine_03"], "Spine1");
  EXPECT_EQ(byTarget["neck_01"], "Neck");
  EXPECT_EQ(byTarget["thigh_l"], "LeftUpLeg");
  EXPECT_EQ(byTarget["calf_r"], "RightLeg");
  EXPECT_EQ(byTarget["lowerarm_l"], "LeftForeArm");
}

TEST(MapFile, ParsesAllSections) {
  const MapOptions o = parseMapOptions(R"({"overrides": {"a": "b"},
      "aliases": {"head": ["Kopf"]}, "primary_child": {"Hips": "Spine"}})");
  ASSERT_EQ(o.overrides.size(), 1u);
  EXPECT_EQ(o.aliases.classify("kopf")->key, "head");
  EXPECT_EQ(o.primaryChild.at("Hips"), "Spine");
  EXPECT_THROW(parseMapOptions("[1,2]"), Error);
  EXPECT_THROW(parseMapOptions("{"), Error);
}

TEST(Alignments, IdentityForIdenticalSkeletons) {
  const Skeleton s = test::humanoid();
  const RetargetMap map = buildRetargetMap(s, s);
  for (const Quat& a : map.alignments) {
    EXPECT_LT(test::quatDistance(a, Quat::Identity()), 1e-9);
  }
}

TEST(Alignments, RigidlyRotatedTarget) {
  const Skeleton s = test::humanoid();
  const Quat r(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()));
  const RetargetMap map = buildRetargetMap(s, transformed(s, r));
  for (const Quat& a : map.alignments) {
    EXPECT_LT(test::quatDistance(a, r), 1e-9);
  }
}

TEST(Alignments, YBoneOntoXBone) {
  const Skeleton src({Joint{"a", -1, Vec3::Zero(), {}}, Joint{"b", 0, Vec3(0, 1, 0), {}}});
  const Skeleton tgt({Joint{"a", -1, Vec3::Zero(), {}}, Joint{"b", 0, Vec3(2, 0, 0), {}}});
  const auto a = computeAlignments(src, tgt, {{0, 0}});
  const Mat3 fs = restFrame(src, 0);
  const Mat3 ft = restFrame(tgt, 0);
  EXPECT_LT((a[0] * Vec3::UnitY() - Vec3::UnitX()).norm(), 1e-12);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT((a[0] * fs.col(c) - ft.col(c)).norm(), 1e-12);
  }
}

TEST(Alignments, ZeroLengthBoneIsDegenerate) {
  const Skeleton s({Joint{"a", -1, Vec3::Zero(), {}}, Joint{"b", 0, Vec3::Zero(), {}}});
  try {
    computeAlignments(s, s, {{1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(Retarget, IdentityRetargetReturnsInput) {
  std::mt19937_64 rng(41);
  const Skeleton s = test::humanoid();
  const RetargetMap map = buildRetargetMap(s, s);
  const bvh::MotionClip clip = bvh::clipFromPoses(s, randomPoses(s, 100, rng), 1.0 / 30);
  const RetargetedClip out = retargetClip(clip, s, map);
  ASSERT_EQ(out.poses.size(), 100u);
  EXPECT_EQ(out.frameTime, clip.frameTime);
  for (std::size_t f = 0; f < 100; ++f) {
    const Pose in = bvh::poseAtFrame(clip, f);
    for (std::size_t k = 0; k < s.size(); ++k) {
      ASSERT_LT(test::quatDistance(out.poses[f].localRotations[k], in.localRotations[k]), 1e-6);
    }
  }
}

TEST(Retarget, UniformScaleScalesWorldPositions) {
  std::mt19937_64 rng(42);
  const Skeleton s = test::humanoid();
  const Skeleton big = s.scaled(2.0);
  const RetargetMap map = buildRetargetMap(s, big);
  EXPECT_NEAR(map.scale, 2.0, 1e-9);
  const bvh::MotionClip clip = bvh::clipFromPoses(s, randomPoses(s, 50, rng), 1.0 / 30);
  const RetargetedClip out = retargetClip(clip, big, map);
  for (std::size_t f = 0; f < clip.frameCount(); ++f) {
    const auto a = forwardKinematics(s, bvh::poseAtFrame(clip, f));
    const auto b = forwardKinematics(big, out.poses[f]);
    for (std::size_t k = 0; k < s.size(); ++k) {
      ASSERT_LT((b[k].translation - 2.0 * a[k].translation).norm(), 1e-4);
      ASSERT_NEAR(out.poses[f].localRotations[k].norm(), 1.0, 1e-9);
    }
  }
}

TEST(Retarget, BoneDirectionFollowsSource) {
  std::mt19937_64 rng(43);
  const Skeleton src({Joint{"root", -1, Vec3::Zero(), {}}, Joint{"tip", 0, Vec3(0, 1, 0), {}}});
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 restDir = test::randomUnit(rng);
    const Skeleton tgt({Joint{"root", -1, Vec3(0.1, 0.2, 0.3), {}}, Joint{"tip", 0, 0.7 * restDir, {}}});
    const RetargetMap map = manualMap(src, tgt, {{0, 0}});
    const Vec3 d = test::randomUnit(rng);
    Pose p = Pose::identity(2);
    p.localRotations[0] = rotationBetween(Vec3::UnitY(), d);
    const Pose out = retargetPose(p, map);
    const auto w = forwardKinematics(tgt, out);
    ASSERT_LT(((w[1].translation - w[0].translation).normalized() - d).norm(), 1e-4);
  }
}

TEST(Retarget, ChildDirectionsAcrossRigs) {
  // Every mapped bone of the target points where the source bone points.
  std::mt19937_64 rng(44);
  const Skeleton src = test::humanoid(true);
  const Quat tilt(Eigen::AngleAxisd(0.4, Vec3(1, 0, 1).normalized()));
  std::vector<Joint> tj = test::humanoid(false).joints();
  for (Joint& j : tj) {
    if (j.name.starts_with("upperarm") || j.name.starts_with("lowerarm")) {
      j.restOffset = tilt * j.restOffset;
    }
  }
  const Skeleton tgt(tj);
  const RetargetMap map = buildRetargetMap(src, tgt);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose p = test::randomPose(src, rng);
    const auto ws = forwardKinematics(src, p);
    const auto wt = forwardKinematics(tgt, retargetPose(p, map));
    for (const char* name : {"LeftForeArm", "RightForeArm", "LeftLeg", "Head"}) {
      const std::size_t s = *src.find(name);
      const std::size_t sc = src.children(s).empty() ? s : src.children(s).front();
      const Vec3 ds = src.children(s).empty() ? Vec3(ws[s].rotation * *src.joint(s).endSite)
                                              : Vec3(ws[sc].translation - ws[s].translation);
      std::size_t t = 0;
      for (const BonePair& bp : map.pairs) {
        if (bp.source == s) {
          t = bp.target;
        }
      }
      const Vec3 dt = tgt.children(t).empty() ? Vec3(wt[t].rotation * *tgt.joint(t).endSite)
                                              : Vec3(wt[tgt.children(t).front()].translation - wt[t].translation);
      ASSERT_LT((ds.normalized() - dt.normalized()).norm(), 1e-6) << name;
    }
  }
}

TEST(Retarget, FrameIndependent) {
  std::mt19937_64 rng(45);
  const bvh::MotionClip clip = bvh::loadBvh(test::fixtureDir() / "bvh" / "cmu_style.bvh");
  const Skeleton tgt = test::humanoid(false);
  MapOptions opts;
  opts.primaryChild["Hips"] = "Spine";
  const RetargetMap map = buildRetargetMap(clip.skeleton, tgt, opts);
  EXPECT_NEAR(map.scale, computeScale(clip.skeleton, tgt), 0.0);
  const RetargetedClip whole = retargetClip(clip, tgt, map);
  for (std::size_t f = 0; f < clip.frameCount(); ++f) {
    const Pose single = retargetPose(bvh::poseAtFrame(clip, f), map);
    for (std::size_t k = 0; k < tgt.size(); ++k) {
      ASSERT_EQ(single.localRotations[k].coeffs(), whole.poses[f].localRotations[k].coeffs());
    }
  }
}

TEST(Retarget, StaleMapIsRejected) {
  const Skeleton s = test::humanoid();
  const RetargetMap map = buildRetargetMap(s, s);
  const bvh::MotionClip other = bvh::clipFromPoses(s.scaled(1.1), {Pose::identity(s.size())}, 0.1);
  try {
    retargetClip(other, s, map);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Conflict);
  }
}

TEST(Retarget, UnmappedTargetJointsStayAtRest) {
  const Skeleton src = test::humanoid();
  std::vector<Joint> tj = src.joints();
  tj.push_back(Joint{"Ponytail", static_cast<int>(*src.find("Head")), Vec3(0, 0.05, -0.1), Vec3(0, -0.1, 0)});
  const Skeleton tgt(tj);
  const RetargetMap map = buildRetargetMap(src, tgt);
  ASSERT_EQ(map.unmappedTarget.size(), 1u);
  EXPECT_EQ(map.warnings.size(), 1u);
  std::mt19937_64 rng(46);
  const Pose out = retargetPose(test::randomPose(src, rng), map);
  EXPECT_EQ(out.localRotations.back().coeffs(), Quat::Identity().coeffs());
}

TEST(PoseBinary, RoundTrip) {
  std::mt19937_64 rng(47);
  const Skeleton s = test::humanoid();
  RetargetedClip clip{s, 0.04, randomPoses(s, 7, rng)};
  const auto bytes = encodePoseBinary(clip);
  EXPECT_EQ(bytes.size(), 8 + 16 + 7 * (12 + 16 * s.size()));
  const RetargetedClip back = decodePoseBinary(bytes, s);
  ASSERT_EQ(back.poses.size(), 7u);
  EXPECT_NEAR(back.frameTime, 0.04, 1e-7);
  for (std::size_t f = 0; f < 7; ++f) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      ASSERT_LT((back.poses[f].localRotations[k].coeffs() - clip.poses[f].localRotations[k].coeffs()).norm(), 1e-6);
    }
  }
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decodePoseBinary(truncated, s), Error);
}

TEST(SkeletonJson, RoundTrip) {
  const Skeleton s = test::humanoid();
  EXPECT_EQ(skeletonFromJson(skeletonToJson(s)), s);
  EXPECT_THROW(skeletonFromJson(R"({"joints": [{"name": "a", "parent": 3, "offset": [0,0,0]}]})"), Error);
}
