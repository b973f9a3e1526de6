#include "bvh.hpp"
#include "bvh_corpus.hpp"
#include "error.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace avf;
using namespace avf::bvh;

namespace {

Mat3 axisMatrix(char axis, double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(r), s = std::sin(r);
  Mat3 m;
  switch (axis) {
    case 'X':
      m << 1, 0, 0, 0, c, -s, 0, s, c;
      break;
    case 'Y':
      m << c, 0, s, 0, 1, 0, -s, 0, c;
      break;
    default:
      m << c, -s, 0, s, c, 0, 0, 0, 1;
  }
  return m;
}

ParseError::Kind parseKind(const std::string& text, std::size_t* line = nullptr) {
  try {
    parseBvh(text);
  } catch (const ParseError& e) {
    if (line) {
      *line = e.line();
    }
    return e.kind();
  }
  ADD_FAILURE() << "parse unexpectedly succeeded";
  return ParseError::Kind::BadRecord;
}

const std::string kMinimal = test::readText(test::fixtureDir() / "bvh" / "minimal.bvh");

} // namespace

TEST(BvhParse, MinimalFixture) {
  const MotionClip clip = parseBvh(kMinimal);
  ASSERT_EQ(clip.skeleton.size(), 2u);
  EXPECT_EQ(clip.channelCount(), 9u);
  ASSERT_EQ(clip.frameCount(), 1u);
  EXPECT_EQ(clip.skeleton.joint(1).name, "Spine");
  EXPECT_EQ(clip.skeleton.joint(1).restOffset, Vec3(0, 1, 0));
  ASSERT_TRUE(clip.skeleton.joint(1).endSite);
  EXPECT_EQ(*clip.skeleton.joint(1).endSite, Vec3(0, 0.5, 0));
  const Pose p = poseAtFrame(clip, 0);
  EXPECT_EQ(p.rootTranslation, Vec3::Zero());
  for (const Quat& q : p.localRotations) {
    EXPECT_LT(test::quatDistance(q, Quat::Identity()), 1e-15);
  }
}

TEST(BvhParse, ExtraFrameRowIsPositioned) {
  std::string text = kMinimal;
  text.replace(text.find("Frames: 1"), 9, "Frames: 2");
  text += "0 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0 0\n";
  std::size_t line = 0;
  EXPECT_EQ(parseKind(text, &line), ParseError::Kind::FrameCount);
  EXPECT_EQ(line, 21u);
}

TEST(BvhParse, TooFewRows) {
  std::string text = kMinimal;
  text.replace(text.find("Frames: 1"), 9, "Frames: 3");
  EXPECT_EQ(parseKind(text), ParseError::Kind::FrameCount);
}

TEST(BvhParse, DistinctPositionedErrors) {
  std::size_t line = 0;
  EXPECT_EQ(parseKind("ROOT a\n{\n}\n", &line), ParseError::Kind::MissingKeyword);
  EXPECT_EQ(line, 1u);

  std::string noMotion = kMinimal.substr(0, kMinimal.find("MOTION"));
  EXPECT_EQ(parseKind(noMotion), ParseError::Kind::MissingKeyword);

  std::string unbalanced = kMinimal;
  unbalanced.erase(unbalanced.find("\t\t}\n"), 4);
  EXPECT_EQ(parseKind(unbalanced), ParseError::Kind::UnbalancedBraces);

  std::string badOffset = kMinimal;
  badOffset.replace(badOffset.find("1.000000"), 8, "1.0.0abc");
  EXPECT_EQ(parseKind(badOffset, &line), ParseError::Kind::BadNumber);
  EXPECT_EQ(line, 8u);

  std::string badRow = kMinimal;
  badRow.replace(badRow.rfind("0 0 0 0 0 0 0 0 0"), 17, "0 0 0 0 0 0 0 0");
  EXPECT_EQ(parseKind(badRow, &line), ParseError::Kind::ChannelCount);
  EXPECT_EQ(line, 19u);

  std::string badChannels = kMinimal;
  badChannels.replace(badChannels.find("CHANNELS 3"), 10, "CHANNELS 4");
  EXPECT_EQ(parseKind(badChannels, &line), ParseError::Kind::ChannelCount);
  EXPECT_EQ(line, 9u);
}

TEST(BvhParse, FixtureCorpusParses) {
  const auto fixtures = test::bvhFixtures();
  ASSERT_GE(fixtures.size(), 10u);
  for (const auto& [name, text] : fixtures) {
    SCOPED_TRACE(name);
    const MotionClip clip = parseBvh(text);
    EXPECT_GE(clip.skeleton.size(), 1u);
  }
}

TEST(BvhParse, DialectFeatures) {
  const auto dir = test::fixtureDir() / "bvh";
  const MotionClip spaced = loadBvh(dir / "spaced_names.bvh");
  EXPECT_EQ(spaced.skeleton.joint(1).name, "Bip01 L Thigh");
  const MotionClip leaf = loadBvh(dir / "leaf_without_end_site.bvh");
  EXPECT_FALSE(leaf.skeleton.joint(1).endSite.has_value());
  const MotionClip crlf = loadBvh(dir / "crlf.bvh");
  EXPECT_EQ(crlf.frameCount(), 3u);
  const MotionClip empty = loadBvh(dir / "empty_motion.bvh");
  EXPECT_EQ(empty.frameCount(), 0u);
  EXPECT_THROW(poseAtFrame(empty, 0), Error);
}

TEST(BvhWrite, FrameTimeSurvives) {
  MotionClip clip = parseBvh(kMinimal);
  clip.frameTime = 0.0333333;
  const MotionClip back = parseBvh(writeBvh(clip));
  EXPECT_NEAR(back.frameTime, 0.0333333, 1e-6);
}

TEST(BvhWrite, MinimalRoundTripIsExact) {
  const MotionClip clip = parseBvh(kMinimal);
  const MotionClip back = parseBvh(writeBvh(clip));
  EXPECT_EQ(back.skeleton, clip.skeleton);
  EXPECT_EQ(back.channels, clip.channels);
  EXPECT_EQ(writeBvh(back), writeBvh(clip));
}

TEST(BvhWrite, CorpusRoundTrip) {
  std::vector<std::string> texts;
  for (const auto& f : test::bvhFixtures()) {
    texts.push_back(f.second);
  }
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    texts.push_back(writeBvh(test::randomClip(rng)));
  }
  for (const std::string& text : texts) {
    const MotionClip a = parseBvh(text);
    const std::string w1 = writeBvh(a);
    const MotionClip b = parseBvh(w1);
    std::string why;
    ASSERT_TRUE(test::clipsClose(a, b, 1e-4, &why)) << why;
    ASSERT_EQ(writeBvh(b), w1);
  }
}

TEST(BvhWrite, CanonicalFormatting) {
  const std::string w = writeBvh(parseBvh(kMinimal));
  EXPECT_NE(w.find("\tOFFSET 0.000000 1.000000 0.000000\n"), std::string::npos);
  EXPECT_EQ(w.find('\r'), std::string::npos);
}

TEST(PoseAtFrame, SingleAxis) {
  const std::string text =
      "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n"
      "End Site\n{\nOFFSET 0 1 0\n}\n}\nMOTION\nFrames: 2\nFrame Time: 0.1\n90 0 0\n90 90 0\n";
  const MotionClip clip = parseBvh(text);
  const Quat q0 = poseAtFrame(clip, 0).localRotations[0];
  EXPECT_LT(test::quatDistance(q0, Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()))), 1e-9);
  const Quat q1 = poseAtFrame(clip, 1).localRotations[0];
  const Mat3 oracle = axisMatrix('Z', 90) * axisMatrix('X', 90);
  EXPECT_LT((q1.toRotationMatrix() - oracle).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(poseAtFrame(clip, 2), Error);
}

TEST(PoseAtFrame, MatchesMatrixCompositionForAllOrders) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 50; ++i) {
    const MotionClip clip = test::randomClip(rng);
    for (std::size_t f = 0; f < clip.frameCount(); ++f) {
      const Pose p = poseAtFrame(clip, f);
      std::size_t col = 0;
      for (std::size_t k = 0; k < clip.skeleton.size(); ++k) {
        Mat3 m = Mat3::Identity();
        Vec3 t = Vec3::Zero();
        for (Channel c : clip.channels[k]) {
          const double v = clip.frames[f][col++];
          const std::string name = channelName(c);
          if (isRotation(c)) {
            m = m * axisMatrix(name[0], v);
          } else {
            t[name[0] - 'X'] = v;
          }
        }
        ASSERT_NEAR(p.localRotations[k].norm(), 1.0, 1e-9);
        ASSERT_LT((p.localRotations[k].toRotationMatrix() - m).cwiseAbs().maxCoeff(), 1e-9);
        if (k == 0) {
          ASSERT_LT((p.rootTranslation - t).norm(), 1e-12);
        }
      }
    }
  }
}

TEST(PoseAtFrame, NonRootPositionsIgnored) {
  const MotionClip clip = loadBvh(test::fixtureDir() / "bvh" / "nonroot_positions.bvh");
  const Pose p = poseAtFrame(clip, 1);
  EXPECT_EQ(p.rootTranslation, Vec3(5, 91, -5));
}

TEST(ClipFromPoses, ReproducesPoses) {
  std::mt19937_64 rng(33);
  const Skeleton s = test::randomTree(8, rng);
  std::vector<Pose> poses;
  for (int f = 0; f < 10; ++f) {
    poses.push_back(test::randomPose(s, rng));
  }
  const MotionClip clip = clipFromPoses(s, poses, 1.0 / 30);
  for (std::size_t f = 0; f < poses.size(); ++f) {
    const Pose p = poseAtFrame(clip, f);
    ASSERT_LT((p.rootTranslation - poses[f].rootTranslation).norm(), 1e-12);
    for (std::size_t k = 0; k < s.size(); ++k) {
      ASSERT_LT(test::quatDistance(p.localRotations[k], poses[f].localRotations[k]), 1e-9);
    }
  }
}

TEST(BvhFuzz, MutatedInputsNeverCrash) {
  std::vector<std::string> seeds;
  for (const auto& f : test::bvhFixtures()) {
    seeds.push_back(f.second);
  }
  std::mt19937_64 rng(34);
  std::size_t accepted = 0;
  for (int i = 0; i < 20000; ++i) {
    const std::string input = test::mutate(seeds[rng() % seeds.size()], rng);
    try {
      const MotionClip clip = parseBvh(input);
      for (std::size_t f = 0; f < std::min<std::size_t>(clip.frameCount(), 2); ++f) {
        poseAtFrame(clip, f);
      }
      writeBvh(clip);
      ++accepted;
    } catch (const ParseError& e) {
      ASSERT_FALSE(std::string(e.what()).empty());
    }
  }
  EXPECT_GT(accepted, 0u);
}

TEST(BvhParse, DeepNestingIsRejectedNotCrashing) {
  std::string text = "HIERARCHY\nROOT r\n{\nOFFSET 0 0 0\n";
  for (int i = 0; i < 100000; ++i) {
    text += "JOINT j" + std::to_string(i) + "\n{\nOFFSET 0 0 0\n";
  }
  EXPECT_THROW(parseBvh(text), ParseError);
}
