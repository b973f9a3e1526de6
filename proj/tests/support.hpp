#pragma once

#include "geometry.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace avf::test {

inline Vec3 randomVec(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec3(u(rng), u(rng), u(rng));
}

inline Vec3 randomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Quat randomQuat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

// Chain of `n` joints with random offsets of length in [0.2, 1].
inline Skeleton randomChain(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> len(0.2, 1.0);
  std::vector<Joint> joints;
  for (std::size_t k = 0; k < n; ++k) {
    Joint j;
    j.name = "j" + std::to_string(k);
    j.parent = static_cast<int>(k) - 1;
    j.restOffset = k == 0 ? randomVec(rng) : Vec3(randomUnit(rng) * len(rng));
    joints.push_back(j);
  }
  joints.back().endSite = randomUnit(rng) * 0.3;
  return Skeleton(joints);
}

// Random tree: each joint's parent drawn among earlier joints.
inline Skeleton randomTree(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> len(0.2, 1.0);
  std::vector<Joint> joints;
  for (std::size_t k = 0; k < n; ++k) {
    Joint j;
    j.name = "bone" + std::to_string(k);
    j.parent = k == 0 ? -1 : static_cast<int>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
    j.restOffset = k == 0 ? randomVec(rng) : Vec3(randomUnit(rng) * len(rng));
    joints.push_back(j);
  }
  std::vector<bool> hasChild(n, false);
  for (const Joint& j : joints) {
    if (j.parent >= 0) {
      hasChild[j.parent] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!hasChild[k]) {
      joints[k].endSite = randomUnit(rng) * 0.25;
    }
  }
  return Skeleton(joints);
}

inline Pose randomPose(const Skeleton& s, std::mt19937_64& rng) {
  Pose p = Pose::identity(s.size());
  for (Quat& q : p.localRotations) {
    q = randomQuat(rng);
  }
  p.rootTranslation = randomVec(rng);
  return p;
}

// Humanoid in a mocap naming style; offsets in meters, T-pose, no bone
// parallel to world Y so rest frames do not hit the secondary-axis fallback.
inline Skeleton humanoid(bool mixamoNames = true) {
  auto n = [&](const char* mocap, const char* other) { return std::string(mixamoNames ? mocap : other); };
  std::vector<Joint> j;
  auto add = [&](std::string name, int parent, Vec3 off, std::optional<Vec3> end = std::nullopt) {
    j.push_back(Joint{std::move(name), parent, off, end});
    return static_cast<int>(j.size()) - 1;
  };
  const int hips = add(n("Hips", "pelvis"), -1, Vec3(0, 0.95, 0));
  const int spine = add(n("Spine", "spine_01"), hips, Vec3(0, 0.12, 0.01));
  const int chest = add(n("Spine1", "spine_03"), spine, Vec3(0, 0.18, -0.01));
  const int neck = add(n("Neck", "neck_01"), chest, Vec3(0, 0.16, 0.02));
  add(n("Head", "head"), neck, Vec3(0, 0.1, 0.01), Vec3(0, 0.18, 0.01));
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const bool l = side == 0;
    const int sh = add(n(l ? "LeftShoulder" : "RightShoulder", l ? "clavicle_l" : "clavicle_r"), chest,
                       Vec3(s * 0.06, 0.12, 0.0));
    const int ua = add(n(l ? "LeftArm" : "RightArm", l ? "upperarm_l" : "upperarm_r"), sh,
                       Vec3(s * 0.12, 0.0, -0.01));
    const int fa = add(n(l ? "LeftForeArm" : "RightForeArm", l ? "lowerarm_l" : "lowerarm_r"), ua,
                       Vec3(s * 0.28, 0.0, 0.0));
    add(n(l ? "LeftHand" : "RightHand", l ? "hand_l" : "hand_r"), fa, Vec3(s * 0.25, 0.0, 0.01),
        Vec3(s * 0.08, 0.0, 0.0));
  }
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const bool l = side == 0;
    const int ul = add(n(l ? "LeftUpLeg" : "RightUpLeg", l ? "thigh_l" : "thigh_r"), hips,
                       Vec3(s * 0.09, -0.05, 0.0));
    const int ll = add(n(l ? "LeftLeg" : "RightLeg", l ? "calf_l" : "calf_r"), ul, Vec3(0.0, -0.42, 0.02));
    add(n(l ? "LeftFoot" : "RightFoot", l ? "foot_l" : "foot_r"), ll, Vec3(0.0, -0.42, -0.03),
        Vec3(0.0, -0.05, 0.14));
  }
  return Skeleton(j);
}

inline double quatDistance(const Quat& a, const Quat& b) {
  const double plus = (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
  const double minus = (a.coeffs() + b.coeffs()).cwiseAbs().maxCoeff();
  return std::min(plus, minus);
}

} // namespace avf::test

namespace avf::test {

// Planar grid of (rows+1) x (cols+1) vertices with quad faces and UVs.
inline Mesh gridMesh(int rows, int cols) {
  Mesh m;
  for (int r = 0; r <= rows; ++r) {
    for (int c = 0; c <= cols; ++c) {
      m.vertices.emplace_back(c * 0.1, r * 0.1, 0.01 * ((r * 7 + c * 3) % 5));
      m.uvs.emplace_back(double(c) / cols, double(r) / rows);
    }
  }
  const auto id = [&](int r, int c) { return static_cast<std::uint32_t>(r * (cols + 1) + c); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m.faces.push_back(Face::quad(id(r, c), id(r, c + 1), id(r + 1, c + 1), id(r + 1, c)));
    }
  }
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "avf") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const {
    return path_;
  }

 private:
  std::filesystem::path path_;
};

} // namespace avf::test
