#include "geometry.hpp"

#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace avf {

void validateMesh(const Mesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.arity != 3 && face.arity != 4) {
      throw Error(ErrorCode::Geometry, "face " + std::to_string(f) + " has arity " +
                                           std::to_string(face.arity));
    }
    const auto idx = face.indices();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= n) {
        throw Error(ErrorCode::Geometry, "face " + std::to_string(f) +
                                             " references vertex " + std::to_string(idx[i]) +
                                             " of " + std::to_string(n));
      }
      for (std::size_t j = i + 1; j < idx.size(); ++j) {
        if (idx[i] == idx[j]) {
          throw Error(ErrorCode::Geometry, "face " + std::to_string(f) + " repeats vertex " +
                                               std::to_string(idx[i]));
        }
      }
    }
  }
  if (!mesh.normals.empty()) {
    if (mesh.normals.size() != n) {
      throw Error(ErrorCode::Geometry, "normal count differs from vertex count");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(mesh.normals[i].norm() - 1.0) > 1e-6) {
        throw Error(ErrorCode::Geometry, "normal " + std::to_string(i) + " is not unit length");
      }
    }
  }
  if (!mesh.uvs.empty() && mesh.uvs.size() != n) {
    throw Error(ErrorCode::Geometry, "uv count differs from vertex count");
  }
}

std::vector<std::array<std::uint32_t, 3>> triangulate(const Mesh& mesh) {
  std::vector<std::array<std::uint32_t, 3>> tris;
  tris.reserve(mesh.faces.size() * 2);
  for (const Face& f : mesh.faces) {
    tris.push_back({f.v[0], f.v[1], f.v[2]});
    if (f.arity == 4) {
      tris.push_back({f.v[0], f.v[2], f.v[3]});
    }
  }
  return tris;
}

std::vector<Vec3> computeVertexNormals(const Mesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : triangulate(mesh)) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
    for (std::uint32_t i : t) {
      acc[i] += n;
    }
  }
  for (Vec3& n : acc) {
    const double len = n.norm();
    n = len > 1e-300 ? Vec3(n / len) : Vec3::UnitY();
  }
  return acc;
}

std::string normalizeJointName(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    if (c == '_' || c == '.' || c == '-' || c == ' ' || c == ':') {
      continue;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

Skeleton::Skeleton(std::vector<Joint> joints) : joints_(std::move(joints)) {
  if (joints_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "skeleton has no joints");
  }
  std::unordered_set<std::string> names;
  for (std::size_t k = 0; k < joints_.size(); ++k) {
    const Joint& j = joints_[k];
    if (k == 0) {
      if (j.parent != -1) {
        throw Error(ErrorCode::InvalidArgument, "first joint must be the root");
      }
    } else if (j.parent < 0 || static_cast<std::size_t>(j.parent) >= k) {
      throw Error(ErrorCode::InvalidArgument,
                  "joint '" + j.name + "' is not in topological order or is a second root");
    }
    if (!names.insert(normalizeJointName(j.name)).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate joint name '" + j.name + "'");
    }
  }
}

std::optional<std::size_t> Skeleton::find(std::string_view name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == name) {
      return i;
    }
  }
  const std::string key = normalizeJointName(name);
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (normalizeJointName(joints_[i].name) == key) {
      return i;
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> Skeleton::children(std::size_t joint) const {
  std::vector<std::size_t> out;
  for (std::size_t k = joint + 1; k < joints_.size(); ++k) {
    if (joints_[k].parent == static_cast<int>(joint)) {
      out.push_back(k);
    }
  }
  return out;
}

std::vector<Vec3> Skeleton::restPositions() const {
  std::vector<Vec3> pos(joints_.size());
  for (std::size_t k = 0; k < joints_.size(); ++k) {
    const Joint& j = joints_[k];
    pos[k] = j.parent < 0 ? j.restOffset : Vec3(pos[j.parent] + j.restOffset);
  }
  return pos;
}

std::vector<Vec3> Skeleton::restPointCloud() const {
  std::vector<Vec3> cloud = restPositions();
  const std::size_t n = cloud.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (joints_[k].endSite) {
      cloud.push_back(cloud[k] + *joints_[k].endSite);
    }
  }
  return cloud;
}

double Skeleton::totalBoneLength() const {
  double total = 0.0;
  for (std::size_t k = 0; k < joints_.size(); ++k) {
    if (k > 0) {
      total += joints_[k].restOffset.norm();
    }
    if (joints_[k].endSite) {
      total += joints_[k].endSite->norm();
    }
  }
  return total;
}

Skeleton Skeleton::scaled(double factor) const {
  std::vector<Joint> joints = joints_;
  for (Joint& j : joints) {
    j.restOffset *= factor;
    if (j.endSite) {
      *j.endSite *= factor;
    }
  }
  return Skeleton(std::move(joints));
}

bool Skeleton::operator==(const Skeleton& o) const {
  if (joints_.size() != o.joints_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < joints_.size(); ++k) {
    const Joint& a = joints_[k];
    const Joint& b = o.joints_[k];
    if (a.name != b.name || a.parent != b.parent || a.restOffset != b.restOffset ||
        a.endSite.has_value() != b.endSite.has_value() ||
        (a.endSite && *a.endSite != *b.endSite)) {
      return false;
    }
  }
  return true;
}

Pose Pose::identity(std::size_t jointCount) {
  Pose p;
  p.localRotations.assign(jointCount, Quat::Identity());
  return p;
}

Transform Transform::inverse() const {
  Transform inv;
  inv.rotation = rotation.conjugate();
  inv.scale = 1.0 / scale;
  inv.translation = -(inv.scale * (inv.rotation * translation));
  return inv;
}

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = scale * rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Transform operator*(const Transform& a, const Transform& b) {
  Transform c;
  c.rotation = (a.rotation * b.rotation).normalized();
  c.scale = a.scale * b.scale;
  c.translation = a.scale * (a.rotation * b.translation) + a.translation;
  return c;
}

void checkPoseMatches(const Skeleton& skeleton, const Pose& pose) {
  if (pose.localRotations.size() != skeleton.size()) {
    throw Error(ErrorCode::Dimension, "pose has " + std::to_string(pose.localRotations.size()) +
                                          " rotations, skeleton has " +
                                          std::to_string(skeleton.size()) + " joints");
  }
}

std::vector<Transform> forwardKinematics(const Skeleton& skeleton, const Pose& pose) {
  checkPoseMatches(skeleton, pose);
  std::vector<Transform> world(skeleton.size());
  for (std::size_t k = 0; k < skeleton.size(); ++k) {
    const Joint& j = skeleton.joint(k);
    Transform local;
    local.rotation = pose.localRotations[k];
    local.translation = j.restOffset;
    if (j.parent < 0) {
      local.translation += pose.rootTranslation;
      world[k] = local;
    } else {
      world[k] = world[j.parent] * local;
    }
  }
  return world;
}

Quat rotationBetween(const Vec3& a, const Vec3& b) {
  const double d = a.dot(b);
  if (d <= -1.0 + 1e-8) {
    const Vec3 absA = a.cwiseAbs();
    Vec3 axis = Vec3::UnitX();
    if (absA.y() < absA.x() && absA.y() <= absA.z()) {
      axis = Vec3::UnitY();
    } else if (absA.z() < absA.x() && absA.z() < absA.y()) {
      axis = Vec3::UnitZ();
    }
    axis = (axis - axis.dot(a) * a).normalized();
    return Quat(0.0, axis.x(), axis.y(), axis.z());
  }
  const Vec3 c = a.cross(b);
  return Quat(1.0 + d, c.x(), c.y(), c.z()).normalized();
}

Quat canonicalQuat(const Quat& q) {
  Quat n = q.normalized();
  if (n.w() < 0.0) {
    n.coeffs() = -n.coeffs();
  }
  return n;
}

Pose composeRigid(const Skeleton& skeleton, const Transform& rigid, const Pose& pose) {
  checkPoseMatches(skeleton, pose);
  if (std::abs(rigid.scale - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "composeRigid requires unit scale");
  }
  Pose out = pose;
  const Vec3& offset = skeleton.joint(0).restOffset;
  out.localRotations[0] = (rigid.rotation * pose.localRotations[0]).normalized();
  out.rootTranslation =
      rigid.rotation * (offset + pose.rootTranslation) + rigid.translation - offset;
  return out;
}

} // namespace avf
