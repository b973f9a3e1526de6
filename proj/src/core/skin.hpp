#pragma once

#include "geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avf::skin {

struct Influence {
  std::uint32_t joint = 0;
  double weight = 0.0;

  bool operator==(const Influence&) const = default;
};

inline constexpr std::size_t kMaxInfluences = 4;

/// Per-vertex joint weights against a bind skeleton and bind pose.
struct SkinBinding {
  std::vector<std::vector<Influence>> weights;
  Skeleton skeleton;
  Pose bindPose;

  /// Throws Error(Dimension) on a vertex-count mismatch and Error(Index) or
  /// Error(InvalidArgument) on broken weights.
  void validate(std::size_t vertexCount) const;
};

/// Drops non-positive weights, keeps the 4 largest (lower joint index wins
/// ties), merges repeated joints and renormalizes to sum 1.
std::vector<Influence> normalizeInfluences(std::vector<Influence> raw);

/// Builds a binding, normalizing every vertex. The bind pose defaults to rest.
SkinBinding makeBinding(const Skeleton& skeleton, std::vector<std::vector<Influence>> raw);

/// Linear blend skinning relative to the bind pose. Normals are carried
/// through the blended rotation and renormalized; when the input has none
/// they are recomputed on the result.
Mesh skinMesh(const Mesh& mesh, const SkinBinding& binding, const Pose& pose);

/// Each cloth vertex copies the binding of its nearest body vertex
/// (Euclidean, ties to the lower body index).
SkinBinding transferWeights(const Mesh& body, const SkinBinding& bodyBinding, const Mesh& cloth);

/// Nearest vertex index for every query point; ties go to the lower index.
std::vector<std::size_t> nearestVertices(const std::vector<Vec3>& points,
                                         const std::vector<Vec3>& queries);

/// Throws Error(Geometry) listing offending edges unless the mesh is closed,
/// edge-manifold and consistently oriented.
void checkClosedManifold(const Mesh& mesh);

/// Inside/outside field of a closed triangle soup, normalized so the
/// interior of an outward-oriented surface is 1.
class WindingNumber {
 public:
  explicit WindingNumber(const Mesh& mesh);
  double operator()(const Vec3& p) const;

 private:
  std::vector<Vec3> a_, b_, c_;
};

struct SurfacePoint {
  Vec3 point;
  std::size_t triangle = 0;
  double distance = 0.0;
};

/// Closest point on a triangulated surface by exhaustive search.
class SurfaceQuery {
 public:
  explicit SurfaceQuery(const Mesh& mesh);
  SurfacePoint closest(const Vec3& p) const;
  /// Unit normal of triangle `t`, oriented outward for an outward mesh.
  const Vec3& faceNormal(std::size_t t) const {
    return normals_[t];
  }

 private:
  std::vector<std::array<Vec3, 3>> tris_;
  std::vector<Vec3> normals_;
  std::vector<Vec3> lo_, hi_;
};

struct PenetrationReport {
  std::size_t moved = 0;
  std::size_t unresolved = 0;
  double maxDisplacement = 0.0;
};

/// Moves every cloth vertex that is inside the body (winding number > 0.5)
/// or closer than `epsilon` to it onto closest-point + epsilon along the
/// outward direction. Vertices already `epsilon` outside are left alone.
Mesh resolvePenetration(const Mesh& body, const Mesh& cloth, double epsilon,
                        PenetrationReport* report = nullptr);

inline constexpr double kDefaultGarmentEpsilon = 0.002;

struct GarmentAsset {
  std::string id;
  Mesh mesh;
  std::optional<SkinBinding> binding;
  std::map<std::string, std::string> textureRefs; // "albedo", "normal_map" -> path
  double offsetEpsilon = kDefaultGarmentEpsilon;
};

/// Rest-pose preparation: resolve penetration against the body, then transfer
/// the body's weights onto the resolved cloth.
GarmentAsset prepareGarment(const Mesh& body, const SkinBinding& bodyBinding, const Mesh& cloth,
                            double epsilon = kDefaultGarmentEpsilon,
                            PenetrationReport* report = nullptr);

} // namespace avf::skin
