#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avf {

// Units are meters, Y-up, right-handed.
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Triangle or quad; `arity` is 3 or 4.
struct Face {
  std::array<std::uint32_t, 4> v{};
  std::uint8_t arity = 3;

  static Face tri(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    return Face{{a, b, c, 0}, 3};
  }
  static Face quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
    return Face{{a, b, c, d}, 4};
  }

  std::span<const std::uint32_t> indices() const {
    return {v.data(), arity};
  }

  bool operator==(const Face& o) const {
    return arity == o.arity && std::equal(v.begin(), v.begin() + arity, o.v.begin());
  }
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> normals; // empty or one per vertex
  std::vector<Vec2> uvs; // empty or one per vertex

  std::size_t vertexCount() const {
    return vertices.size();
  }
};

/// Throws Error(Geometry) naming the first violated invariant.
void validateMesh(const Mesh& mesh);

/// Area-weighted vertex normals; isolated vertices get +Y.
std::vector<Vec3> computeVertexNormals(const Mesh& mesh);

/// Quads are split along the (0,2) diagonal.
std::vector<std::array<std::uint32_t, 3>> triangulate(const Mesh& mesh);

struct Joint {
  std::string name;
  int parent = -1;
  Vec3 restOffset = Vec3::Zero();
  std::optional<Vec3> endSite;
};

/// Lowercased with '_', '.', '-', ' ' and ':' removed.
std::string normalizeJointName(std::string_view name);

/// Topologically ordered joint list; joint 0 is the root.
class Skeleton {
 public:
  Skeleton() = default;
  explicit Skeleton(std::vector<Joint> joints);

  const std::vector<Joint>& joints() const {
    return joints_;
  }
  const Joint& joint(std::size_t i) const {
    return joints_.at(i);
  }
  std::size_t size() const {
    return joints_.size();
  }
  bool empty() const {
    return joints_.empty();
  }

  /// Index by exact name first, then by normalized name.
  std::optional<std::size_t> find(std::string_view name) const;
  std::vector<std::size_t> children(std::size_t joint) const;

  /// Rest world positions (identity rotations).
  std::vector<Vec3> restPositions() const;
  /// Rest positions plus every end site, in that order.
  std::vector<Vec3> restPointCloud() const;
  double totalBoneLength() const;

  /// Copy with every offset (and end site) multiplied by `factor`.
  Skeleton scaled(double factor) const;

  bool operator==(const Skeleton& o) const;

 private:
  std::vector<Joint> joints_;
};

struct Pose {
  Vec3 rootTranslation = Vec3::Zero();
  std::vector<Quat> localRotations;

  static Pose identity(std::size_t jointCount);
};

/// Rigid transform with uniform scale: p -> scale * (rotation * p) + translation.
struct Transform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const {
    return scale * (rotation * p) + translation;
  }
  Vec3 applyVector(const Vec3& d) const {
    return rotation * d;
  }

  Transform inverse() const;
  Mat4 matrix() const;

  friend Transform operator*(const Transform& a, const Transform& b);
};

/// Throws Error(Dimension) if the pose does not match the skeleton.
void checkPoseMatches(const Skeleton& skeleton, const Pose& pose);

/// Per-joint world transform: world(k) = world(parent) * local(k), with
/// local(k) = {rotation_k, rest_offset_k}; the root adds root_translation.
std::vector<Transform> forwardKinematics(const Skeleton& skeleton, const Pose& pose);

/// Minimal rotation taking unit `a` onto unit `b`. Antiparallel input yields a
/// half turn about the coordinate axis least aligned with `a`, made
/// perpendicular to it.
Quat rotationBetween(const Vec3& a, const Vec3& b);

/// Normalized, with w >= 0.
Quat canonicalQuat(const Quat& q);

/// Applies a rigid world transform to a pose in place of the root.
Pose composeRigid(const Skeleton& skeleton, const Transform& rigid, const Pose& pose);

} // namespace avf
