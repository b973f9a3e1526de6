#include "demo.hpp"

#include "binary_io.hpp"
#include "bone_names.hpp"
#include "error.hpp"
#include "library.hpp"
#include "obj.hpp"
#include "primitives.hpp"
#include "retarget.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace avf::demo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class SkeletonBuilder {
 public:
  int add(std::string name, int parent, Vec3 offset, std::optional<Vec3> end = std::nullopt) {
    joints_.push_back(Joint{std::move(name), parent, offset, end});
    return static_cast<int>(joints_.size()) - 1;
  }
  Skeleton build() {
    return Skeleton(std::move(joints_));
  }

 private:
  std::vector<Joint> joints_;
};

struct Part {
  std::size_t joint;
  Vec3 a, b;
  double rx, rz;
  std::optional<std::size_t> child; // joint at `b`, blended near the far end
};

std::vector<Part> bodyParts(const Skeleton& sk) {
  const auto rest = sk.restPositions();
  auto at = [&](const char* name) {
    const auto i = sk.find(name);
    if (!i) {
      throw Error(ErrorCode::NotFound, std::string("demo skeleton lacks ") + name);
    }
    return *i;
  };
  auto seg = [&](const char* from, const char* to, double rx, double rz) {
    return Part{at(from), rest[at(from)], rest[at(to)], rx, rz, at(to)};
  };
  auto tip = [&](const char* from, double rx, double rz) {
    const std::size_t j = at(from);
    return Part{j, rest[j], rest[j] + *sk.joint(j).endSite, rx, rz, std::nullopt};
  };
  std::vector<Part> parts;
  Part pelvis = seg("pelvis", "spine_01", 0.16, 0.11);
  pelvis.a = rest[at("pelvis")] + Vec3(0.0, -0.10, 0.0);
  parts.push_back(pelvis);
  parts.push_back(seg("spine_01", "spine_02", 0.14, 0.10));
  parts.push_back(seg("spine_02", "spine_03", 0.15, 0.10));
  parts.push_back(seg("spine_03", "neck_01", 0.17, 0.11));
  parts.push_back(seg("neck_01", "head", 0.05, 0.05));
  parts.push_back(tip("head", 0.09, 0.10));
  for (const char* s : {"l", "r"}) {
    auto n = [&](const char* base) { return std::string(base) + "_" + s; };
    parts.push_back(seg(n("upperarm").c_str(), n("lowerarm").c_str(), 0.05, 0.05));
    parts.push_back(seg(n("lowerarm").c_str(), n("hand").c_str(), 0.04, 0.04));
    parts.push_back(tip(n("hand").c_str(), 0.045, 0.02));
    parts.push_back(seg(n("thigh").c_str(), n("calf").c_str(), 0.075, 0.075));
    parts.push_back(seg(n("calf").c_str(), n("foot").c_str(), 0.055, 0.055));
    parts.push_back(seg(n("foot").c_str(), n("ball").c_str(), 0.045, 0.04));
    parts.push_back(tip(n("ball").c_str(), 0.04, 0.03));
  }
  return parts;
}

double clamp01(double t) {
  return std::clamp(t, 0.0, 1.0);
}

double gauss(double x) {
  return std::exp(-0.5 * x * x);
}

Vec3 closestOnSegment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = clamp01((p - a).dot(d) / d.squaredNorm());
  return a + t * d;
}

using retarget::BodyGroup;

bool isArm(BodyGroup g) {
  return g == BodyGroup::UpperArmLeft || g == BodyGroup::UpperArmRight ||
         g == BodyGroup::LowerArmLeft || g == BodyGroup::LowerArmRight ||
         g == BodyGroup::HandLeft || g == BodyGroup::HandRight;
}

bool isLeg(BodyGroup g) {
  return g == BodyGroup::UpperLegLeft || g == BodyGroup::UpperLegRight ||
         g == BodyGroup::LowerLegLeft || g == BodyGroup::LowerLegRight ||
         g == BodyGroup::FootLeft || g == BodyGroup::FootRight;
}

// Attribute displacement of one vertex at amplitude `a`.
Vec3 displace(int attribute, double a, const Vec3& p, BodyGroup g, const Vec3& axisPoint) {
  Vec3 d = Vec3::Zero();
  switch (attribute) {
    case 0: // height
      d.y() = 0.06 * a * p.y();
      break;
    case 1: { // weight
      const double f = (g == BodyGroup::Head || g == BodyGroup::HandLeft ||
                        g == BodyGroup::HandRight || g == BodyGroup::FootLeft ||
                        g == BodyGroup::FootRight)
                           ? 0.05
                           : 0.25;
      d = f * a * (p - axisPoint);
      break;
    }
    case 2: // belly
      if (g == BodyGroup::Torso && p.z() > 0.0) {
        d.z() = 0.06 * a * gauss((p.y() - 1.12) / 0.09) * (p.z() / 0.11);
      }
      break;
    case 3: // shoulders
      if (isArm(g)) {
        d.x() = 0.03 * a * (p.x() > 0 ? 1.0 : -1.0);
      } else if (g == BodyGroup::Torso) {
        d.x() = 0.15 * a * p.x() * clamp01((p.y() - 1.28) / 0.14);
      }
      break;
    case 4: // hips
      if (g == BodyGroup::Torso || isLeg(g)) {
        d.x() = 0.14 * a * p.x() * gauss((p.y() - 0.9) / 0.1);
      }
      break;
    case 5: // arm_length
      if (isArm(g)) {
        const double s = p.x() > 0 ? 1.0 : -1.0;
        d.x() = 0.1 * a * s * std::max(0.0, std::abs(p.x()) - 0.17) / 0.6;
      }
      break;
    case 6: // leg_length
      if (p.y() < 0.9) {
        d.y() = -0.08 * a * (0.9 - p.y());
      }
      break;
    default:
      break;
  }
  return d;
}

const char* const kAttributeNames[7] = {"height",    "weight",     "belly",     "shoulders",
                                        "hips",      "arm_length", "leg_length"};

void setChannel(bvh::MotionClip& clip, std::vector<double>& row, const std::string& joint,
                bvh::Channel ch, double value) {
  const auto j = clip.skeleton.find(joint);
  if (!j) {
    return;
  }
  std::size_t col = 0;
  for (std::size_t k = 0; k < *j; ++k) {
    col += clip.channels[k].size();
  }
  const auto& chans = clip.channels[*j];
  for (std::size_t c = 0; c < chans.size(); ++c) {
    if (chans[c] == ch) {
      row[col + c] = value;
      return;
    }
  }
}

} // namespace

Skeleton bodySkeleton() {
  SkeletonBuilder b;
  const int pelvis = b.add("pelvis", -1, Vec3(0.0, 0.95, 0.0));
  const int s1 = b.add("spine_01", pelvis, Vec3(0.0, 0.10, 0.01));
  const int s2 = b.add("spine_02", s1, Vec3(0.0, 0.12, 0.005));
  const int s3 = b.add("spine_03", s2, Vec3(0.0, 0.14, -0.01));
  const int neck = b.add("neck_01", s3, Vec3(0.0, 0.16, 0.01));
  b.add("head", neck, Vec3(0.0, 0.09, 0.01), Vec3(0.0, 0.18, 0.005));
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const std::string x = side == 0 ? "_l" : "_r";
    const int cl = b.add("clavicle" + x, s3, Vec3(s * 0.03, 0.11, 0.0));
    const int ua = b.add("upperarm" + x, cl, Vec3(s * 0.14, 0.0, 0.0));
    const int la = b.add("lowerarm" + x, ua, Vec3(s * 0.28, 0.0, -0.005));
    b.add("hand" + x, la, Vec3(s * 0.25, 0.0, 0.0), Vec3(s * 0.09, 0.0, 0.0));
  }
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const std::string x = side == 0 ? "_l" : "_r";
    const int th = b.add("thigh" + x, pelvis, Vec3(s * 0.09, -0.04, 0.0));
    const int ca = b.add("calf" + x, th, Vec3(0.0, -0.42, 0.01));
    const int ft = b.add("foot" + x, ca, Vec3(0.0, -0.42, -0.03));
    b.add("ball" + x, ft, Vec3(0.0, -0.05, 0.12), Vec3(0.0, 0.0, 0.06));
  }
  return b.build();
}

Body body(const Skeleton& skeleton, int subdivisions) {
  std::vector<Mesh> meshes;
  std::vector<std::vector<skin::Influence>> raw;
  for (const Part& part : bodyParts(skeleton)) {
    const Vec3 axis = part.b - part.a;
    const double len = axis.norm();
    const Vec3 dir = axis / len;
    const Vec3 radii(part.rx, 0.5 * len + 0.02, part.rz);
    const Quat orient = rotationBetween(Vec3::UnitY(), dir);
    Mesh m = primitives::ellipsoid(subdivisions, radii, 0.5 * (part.a + part.b), orient);
    const int parent = skeleton.joint(part.joint).parent;
    for (const Vec3& p : m.vertices) {
      const double t = (p - part.a).dot(dir) / len;
      const double wParent = parent >= 0 ? 0.5 * clamp01((0.2 - t) / 0.2) : 0.0;
      const double wChild = part.child ? 0.5 * clamp01((t - 0.8) / 0.2) : 0.0;
      std::vector<skin::Influence> v{
          {static_cast<std::uint32_t>(part.joint), 1.0 - wParent - wChild}};
      if (wParent > 0.0) {
        v.push_back({static_cast<std::uint32_t>(parent), wParent});
      }
      if (wChild > 0.0) {
        v.push_back({static_cast<std::uint32_t>(*part.child), wChild});
      }
      raw.push_back(std::move(v));
    }
    meshes.push_back(std::move(m));
  }
  Body out;
  out.rest = primitives::merge(meshes);
  out.binding = skin::makeBinding(skeleton, std::move(raw));
  return out;
}

std::vector<shape::AttributeSubset> attributeCorpus(const Mesh& rest, const Skeleton& skeleton,
                                                    int samplesPerAttribute, unsigned seed) {
  if (samplesPerAttribute < 2) {
    throw Error(ErrorCode::InvalidArgument, "corpus needs at least 2 samples per attribute");
  }
  const Body reference = body(skeleton);
  if (reference.rest.vertexCount() != rest.vertexCount()) {
    throw Error(ErrorCode::Dimension, "rest mesh does not match the demo body");
  }
  const auto groups = retarget::bodyGroups(skeleton, retarget::AliasTable::builtin());
  const auto parts = bodyParts(skeleton);

  std::vector<BodyGroup> group(rest.vertexCount());
  std::vector<Vec3> axisPoint(rest.vertexCount());
  std::size_t v = 0;
  const std::size_t perPart = rest.vertexCount() / parts.size();
  for (const Part& part : parts) {
    for (std::size_t k = 0; k < perPart; ++k, ++v) {
      group[v] = groups[part.joint];
      axisPoint[v] = closestOnSegment(rest.vertices[v], part.a, part.b);
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> leak(-0.05, 0.05);
  std::vector<shape::AttributeSubset> corpus;
  for (int attr = 0; attr < 7; ++attr) {
    shape::AttributeSubset subset;
    subset.name = kAttributeNames[attr];
    for (int s = 0; s < samplesPerAttribute; ++s) {
      const double a = -1.0 + 2.0 * s / (samplesPerAttribute - 1);
      const int other = (attr + 1 + s % 6) % 7;
      const double b = leak(rng);
      Mesh m = rest;
      for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        const Vec3& p = rest.vertices[i];
        m.vertices[i] = p + displace(attr, a, p, group[i], axisPoint[i]) +
                        displace(other, b, p, group[i], axisPoint[i]);
      }
      m.normals.clear();
      subset.samples.push_back(std::move(m));
    }
    corpus.push_back(std::move(subset));
  }
  std::sort(corpus.begin(), corpus.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  return corpus;
}

std::vector<GarmentSpec> garments(const Skeleton& skeleton) {
  const auto rest = skeleton.restPositions();
  const Vec3 pelvis = rest[*skeleton.find("pelvis")];
  const Vec3 neck = rest[*skeleton.find("neck_01")];
  std::vector<GarmentSpec> out;
  out.push_back({"garment-scarf", "Scarf",
                 primitives::tube(neck + Vec3(0, -0.05, 0.0), neck + Vec3(0, 0.06, 0.0), 0.07, 24,
                                  5, false)});
  out.push_back({"garment-shirt", "Shirt",
                 primitives::tube(pelvis + Vec3(0, 0.04, 0.0), neck + Vec3(0, -0.05, 0.0), 0.2, 32,
                                  12, false)});
  out.push_back({"garment-skirt", "Skirt",
                 primitives::tube(pelvis + Vec3(0, -0.33, 0.0), pelvis + Vec3(0, 0.03, 0.0), 0.19,
                                  32, 10, false)});
  return out;
}

Skeleton mocapSkeleton() {
  SkeletonBuilder b;
  const int hips = b.add("Hips", -1, Vec3::Zero());
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const std::string n = side == 0 ? "Left" : "Right";
    const int hj = b.add(side == 0 ? "LHipJoint" : "RHipJoint", hips, Vec3::Zero());
    const int ul = b.add(n + "UpLeg", hj, Vec3(s * 1.6, -1.8, 0.1));
    const int lg = b.add(n + "Leg", ul, Vec3(s * 0.1, -7.4, 0.15));
    const int ft = b.add(n + "Foot", lg, Vec3(0.0, -7.5, -0.3));
    b.add(n + "ToeBase", ft, Vec3(0.0, -0.45, 2.2), Vec3(0.0, 0.0, 1.0));
  }
  const int lb = b.add("LowerBack", hips, Vec3::Zero());
  const int sp = b.add("Spine", lb, Vec3(0.0, 2.0, 0.05));
  const int sp1 = b.add("Spine1", sp, Vec3(0.0, 2.1, -0.1));
  const int nk = b.add("Neck", sp1, Vec3::Zero());
  const int nk1 = b.add("Neck1", nk, Vec3(0.0, 1.7, 0.1));
  b.add("Head", nk1, Vec3(0.0, 1.6, 0.1), Vec3(0.0, 2.8, 0.05));
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const std::string n = side == 0 ? "Left" : "Right";
    const int sh = b.add(n + "Shoulder", sp1, Vec3::Zero());
    const int ar = b.add(n + "Arm", sh, Vec3(s * 2.9, 1.6, 0.0));
    const int fa = b.add(n + "ForeArm", ar, Vec3(s * 4.3, 0.0, -0.1));
    b.add(n + "Hand", fa, Vec3(s * 3.8, 0.0, 0.0), Vec3(s * 1.4, 0.0, 0.0));
  }
  return b.build();
}

bvh::MotionClip motion(const std::string& kind, std::size_t frames) {
  if (kind != "walk" && kind != "wave") {
    throw Error(ErrorCode::InvalidArgument, "unknown demo motion '" + kind + "'");
  }
  using bvh::Channel;
  bvh::MotionClip clip;
  clip.skeleton = mocapSkeleton();
  clip.frameTime = 1.0 / 30.0;
  for (std::size_t j = 0; j < clip.skeleton.size(); ++j) {
    if (j == 0) {
      clip.channels.push_back({Channel::Xposition, Channel::Yposition, Channel::Zposition,
                               Channel::Zrotation, Channel::Yrotation, Channel::Xrotation});
    } else {
      clip.channels.push_back({Channel::Zrotation, Channel::Yrotation, Channel::Xrotation});
    }
  }
  const std::size_t width = clip.channelCount();
  for (std::size_t i = 0; i < frames; ++i) {
    std::vector<double> row(width, 0.0);
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / 30.0;
    auto set = [&](const std::string& joint, Channel ch, double v) {
      setChannel(clip, row, joint, ch, v);
    };
    set("LeftArm", Channel::Zrotation, -70.0);
    set("RightArm", Channel::Zrotation, 70.0);
    if (kind == "walk") {
      set("Hips", Channel::Yposition, 17.2 + 0.3 * std::sin(2.0 * phi));
      set("Hips", Channel::Zposition, 0.7 * static_cast<double>(i));
      set("LeftUpLeg", Channel::Xrotation, -25.0 * std::sin(phi));
      set("RightUpLeg", Channel::Xrotation, 25.0 * std::sin(phi));
      set("LeftLeg", Channel::Xrotation, 15.0 * (1.0 - std::cos(phi)));
      set("RightLeg", Channel::Xrotation, 15.0 * (1.0 + std::cos(phi)));
      set("LeftArm", Channel::Yrotation, 20.0 * std::sin(phi));
      set("RightArm", Channel::Yrotation, 20.0 * std::sin(phi));
      set("Spine", Channel::Yrotation, 5.0 * std::sin(phi));
    } else {
      set("Hips", Channel::Yposition, 17.2);
      set("RightArm", Channel::Zrotation, -60.0);
      set("RightForeArm", Channel::Zrotation, -40.0 + 25.0 * std::sin(2.0 * phi));
      set("Head", Channel::Yrotation, 10.0 * std::sin(phi));
    }
    clip.frames.push_back(std::move(row));
  }
  return clip;
}

std::string motionMapJson() {
  const json j = {{"primary_child", {{"Hips", "Spine"}}}};
  return j.dump(2) + "\n";
}

const std::vector<std::uint8_t>& placeholderPng() {
  static const std::vector<std::uint8_t> png = {
      0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
      0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00,
      0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00, 0x0c, 0x49, 0x44, 0x41, 0x54, 0x78,
      0x9c, 0x63, 0xd8, 0x32, 0xa7, 0x05, 0x00, 0x03, 0xdc, 0x01, 0xd5, 0x42, 0x55, 0x72,
      0x37, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
  return png;
}

void writeLibrary(const fs::path& dir, const fs::path& corpusDir) {
  const Skeleton sk = bodySkeleton();
  const Body b = body(sk);
  const auto corpus = attributeCorpus(b.rest, sk);
  const shape::BlendShapeBasis basis = shape::buildAttributeBasis(corpus, b.rest);
  const auto& png = placeholderPng();

  const fs::path bodyDir = dir / "body";
  fs::create_directories(bodyDir);
  shape::saveBasis(basis, bodyDir / "basis.avbasis");
  writeFileText(bodyDir / "skeleton.json", retarget::skeletonToJson(sk));
  writeFileText(bodyDir / "weights.json", assets::weightsToJson(b.binding));
  writeFileBytes(bodyDir / "thumbnail.png", png);
  const json bodyManifest = {
      {"id", "body-demo"},
      {"kind", "body-basis"},
      {"name", "Demo body"},
      {"thumbnail", "thumbnail.png"},
      {"files",
       {{"basis", "basis.avbasis"}, {"skeleton", "skeleton.json"}, {"weights", "weights.json"}}}};
  writeFileText(bodyDir / "asset.json", bodyManifest.dump(2) + "\n");

  for (const GarmentSpec& g : garments(sk)) {
    const fs::path gdir = dir / "garments" / g.id;
    fs::create_directories(gdir);
    writeFileBytes(gdir / "albedo.png", png);
    writeFileBytes(gdir / "thumbnail.png", png);
    skin::GarmentAsset prepared = skin::prepareGarment(b.rest, b.binding, g.cloth);
    prepared.id = g.id;
    prepared.textureRefs["albedo"] = "albedo.png";
    assets::writeGarment(prepared, g.name, gdir, fs::path("thumbnail.png"));
  }

  for (const char* kind : {"walk", "wave"}) {
    const fs::path mdir = dir / "motions" / kind;
    fs::create_directories(mdir);
    bvh::saveBvh(motion(kind, kind == std::string("walk") ? 60 : 45), mdir / "clip.bvh");
    writeFileText(mdir / "map.json", motionMapJson());
    writeFileBytes(mdir / "thumbnail.png", png);
    const json manifest = {{"id", std::string("motion-") + kind},
                           {"kind", "motion"},
                           {"name", kind == std::string("walk") ? "Walk cycle" : "Wave"},
                           {"thumbnail", "thumbnail.png"},
                           {"files", {{"bvh", "clip.bvh"}, {"map", "map.json"}}}};
    writeFileText(mdir / "asset.json", manifest.dump(2) + "\n");
  }

  if (!corpusDir.empty()) {
    fs::create_directories(corpusDir);
    assets::saveObj(b.rest, corpusDir / "rest.obj");
    for (const auto& subset : corpus) {
      const fs::path sdir = corpusDir / "attributes" / subset.name;
      fs::create_directories(sdir);
      for (std::size_t i = 0; i < subset.samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%02zu.obj", i);
        assets::saveObj(subset.samples[i], sdir / name);
      }
    }
  }
}

} // namespace avf::demo
