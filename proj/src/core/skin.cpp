#include "skin.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace avf::skin {

std::vector<Influence> normalizeInfluences(std::vector<Influence> raw) {
  std::sort(raw.begin(), raw.end(),
            [](const Influence& a, const Influence& b) { return a.joint < b.joint; });
  std::vector<Influence> merged;
  for (const Influence& in : raw) {
    if (!(in.weight > 0.0) || !std::isfinite(in.weight)) {
      continue;
    }
    if (!merged.empty() && merged.back().joint == in.joint) {
      merged.back().weight += in.weight;
    } else {
      merged.push_back(in);
    }
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Influence& a, const Influence& b) { return a.weight > b.weight; });
  if (merged.size() > kMaxInfluences) {
    merged.resize(kMaxInfluences);
  }
  double sum = 0.0;
  for (const Influence& in : merged) {
    sum += in.weight;
  }
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "vertex has no positive skin weight");
  }
  for (Influence& in : merged) {
    in.weight /= sum;
  }
  return merged;
}

SkinBinding makeBinding(const Skeleton& skeleton, std::vector<std::vector<Influence>> raw) {
  SkinBinding b;
  b.skeleton = skeleton;
  b.bindPose = Pose::identity(skeleton.size());
  b.weights.reserve(raw.size());
  for (std::size_t v = 0; v < raw.size(); ++v) {
    for (const Influence& in : raw[v]) {
      if (in.joint >= skeleton.size()) {
        throw Error(ErrorCode::Index, "vertex " + std::to_string(v) + " references joint " +
                                          std::to_string(in.joint) + " of " +
                                          std::to_string(skeleton.size()));
      }
    }
    try {
      b.weights.push_back(normalizeInfluences(std::move(raw[v])));
    } catch (const Error& e) {
      throw Error(e.code(), "vertex " + std::to_string(v) + ": " + e.what());
    }
  }
  return b;
}

void SkinBinding::validate(std::size_t vertexCount) const {
  if (weights.size() != vertexCount) {
    throw Error(ErrorCode::Dimension, "binding has " + std::to_string(weights.size()) +
                                          " vertices, mesh has " + std::to_string(vertexCount));
  }
  checkPoseMatches(skeleton, bindPose);
  for (std::size_t v = 0; v < weights.size(); ++v) {
    const auto& w = weights[v];
    if (w.empty() || w.size() > kMaxInfluences) {
      throw Error(ErrorCode::InvalidArgument,
                  "vertex " + std::to_string(v) + " has " + std::to_string(w.size()) + " influences");
    }
    double sum = 0.0;
    for (const Influence& in : w) {
      if (in.joint >= skeleton.size()) {
        throw Error(ErrorCode::Index, "vertex " + std::to_string(v) + " references joint " +
                                          std::to_string(in.joint));
      }
      if (!(in.weight > 0.0) || in.weight > 1.0 + 1e-9) {
        throw Error(ErrorCode::InvalidArgument,
                    "vertex " + std::to_string(v) + " has a weight outside (0,1]");
      }
      sum += in.weight;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidArgument,
                  "weights of vertex " + std::to_string(v) + " sum to " + std::to_string(sum));
    }
  }
}

Mesh skinMesh(const Mesh& mesh, const SkinBinding& binding, const Pose& pose) {
  binding.validate(mesh.vertices.size());
  checkPoseMatches(binding.skeleton, pose);
  const auto posed = forwardKinematics(binding.skeleton, pose);
  const auto bind = forwardKinematics(binding.skeleton, binding.bindPose);

  std::vector<Mat3> rot(posed.size());
  std::vector<Vec3> trans(posed.size());
  for (std::size_t j = 0; j < posed.size(); ++j) {
    const Transform m = posed[j] * bind[j].inverse();
    rot[j] = m.rotation.toRotationMatrix() * m.scale;
    trans[j] = m.translation;
  }

  Mesh out = mesh;
  const bool haveNormals = mesh.normals.size() == mesh.vertices.size();
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    Vec3 p = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    for (const Influence& in : binding.weights[v]) {
      p += in.weight * (rot[in.joint] * mesh.vertices[v] + trans[in.joint]);
      if (haveNormals) {
        n += in.weight * (rot[in.joint] * mesh.normals[v]);
      }
    }
    out.vertices[v] = p;
    if (haveNormals) {
      const double len = n.norm();
      out.normals[v] = len > 1e-12 ? Vec3(n / len) : mesh.normals[v];
    }
  }
  if (!haveNormals) {
    out.normals = computeVertexNormals(out);
  }
  return out;
}

namespace {

// Static k-d tree over a point set; exact nearest neighbour with a
// deterministic lower-index tie-break.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts), order_(pts.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!pts.empty()) {
      nodes_.reserve(2 * pts.size() / kLeaf + 2);
      build(0, pts.size());
    }
  }

  std::size_t nearest(const Vec3& q) const {
    Best best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::size_t>::max()};
    search(0, q, best);
    return best.index;
  }

 private:
  static constexpr std::size_t kLeaf = 8;
  struct Node {
    std::size_t begin, end;
    int axis; // -1 for leaves
    double split;
    std::size_t left, right;
  };
  struct Best {
    double d2;
    std::size_t index;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end, -1, 0.0, 0, 0});
    if (end - begin <= kLeaf) {
      return id;
    }
    Vec3 lo = pts_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_[order_[i]]);
      hi = hi.cwiseMax(pts_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<long>(begin), order_.begin() + static_cast<long>(mid),
                     order_.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                       return pts_[a][axis] < pts_[b][axis];
                     });
    const double split = pts_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const Vec3& q, Best& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (pts_[idx] - q).squaredNorm();
        if (d2 < best.d2 || (d2 == best.d2 && idx < best.index)) {
          best = {d2, idx};
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t first = diff < 0 ? n.left : n.right;
    const std::size_t second = diff < 0 ? n.right : n.left;
    search(first, q, best);
    // Points equal to the split value can sit on either side, so only a
    // strictly larger plane distance prunes.
    if (diff * diff <= best.d2) {
      search(second, q, best);
    }
  }

  const std::vector<Vec3>& pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

} // namespace

std::vector<std::size_t> nearestVertices(const std::vector<Vec3>& points,
                                         const std::vector<Vec3>& queries) {
  if (points.empty()) {
    throw Error(ErrorCode::InvalidArgument, "nearest-vertex search over an empty mesh");
  }
  const KdTree tree(points);
  std::vector<std::size_t> out;
  out.reserve(queries.size());
  for (const Vec3& q : queries) {
    out.push_back(tree.nearest(q));
  }
  return out;
}

SkinBinding transferWeights(const Mesh& body, const SkinBinding& bodyBinding, const Mesh& cloth) {
  if (body.vertices.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot transfer weights from an empty body mesh");
  }
  bodyBinding.validate(body.vertices.size());
  SkinBinding out;
  out.skeleton = bodyBinding.skeleton;
  out.bindPose = bodyBinding.bindPose;
  out.weights.reserve(cloth.vertices.size());
  for (std::size_t src : nearestVertices(body.vertices, cloth.vertices)) {
    out.weights.push_back(bodyBinding.weights[src]);
  }
  return out;
}

void checkClosedManifold(const Mesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<int, int>> edges; // (lo,hi) -> (fwd, back)
  for (const auto& t : triangulate(mesh)) {
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e];
      const std::uint32_t b = t[(e + 1) % 3];
      auto& c = edges[{std::min(a, b), std::max(a, b)}];
      (a < b ? c.first : c.second) += 1;
    }
  }
  std::vector<std::string> bad;
  for (const auto& [e, c] : edges) {
    if (c.first != 1 || c.second != 1) {
      bad.push_back("(" + std::to_string(e.first) + "," + std::to_string(e.second) + ")");
    }
  }
  if (edges.empty()) {
    throw Error(ErrorCode::Geometry, "body mesh has no faces");
  }
  if (!bad.empty()) {
    std::string list;
    for (std::size_t i = 0; i < bad.size() && i < 32; ++i) {
      list += (i ? " " : "") + bad[i];
    }
    if (bad.size() > 32) {
      list += " ...";
    }
    throw Error(ErrorCode::Geometry, "body mesh is not closed and manifold; " +
                                         std::to_string(bad.size()) + " offending edges: " + list);
  }
}

WindingNumber::WindingNumber(const Mesh& mesh) {
  for (const auto& t : triangulate(mesh)) {
    a_.push_back(mesh.vertices[t[0]]);
    b_.push_back(mesh.vertices[t[1]]);
    c_.push_back(mesh.vertices[t[2]]);
  }
}

double WindingNumber::operator()(const Vec3& p) const {
  double total = 0.0;
  for (std::size_t i = 0; i < a_.size(); ++i) {
    const Vec3 a = a_[i] - p;
    const Vec3 b = b_[i] - p;
    const Vec3 c = c_[i] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * std::numbers::pi);
}

namespace {

Vec3 closestOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) {
    return a;
  }
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) {
    return b;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    return a + (d1 / (d1 - d3)) * ab;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) {
    return c;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    return a + (d2 / (d2 - d6)) * ac;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

} // namespace

SurfaceQuery::SurfaceQuery(const Mesh& mesh) {
  for (const auto& t : triangulate(mesh)) {
    const std::array<Vec3, 3> tri{mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
    const Vec3 n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    tris_.push_back(tri);
    normals_.push_back(n.norm() > 0 ? Vec3(n.normalized()) : Vec3::UnitY());
    lo_.push_back(tri[0].cwiseMin(tri[1]).cwiseMin(tri[2]));
    hi_.push_back(tri[0].cwiseMax(tri[1]).cwiseMax(tri[2]));
  }
}

SurfacePoint SurfaceQuery::closest(const Vec3& p) const {
  SurfacePoint best{p, 0, std::numeric_limits<double>::infinity()};
  double bestD2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tris_.size(); ++i) {
    const Vec3 boxGap = (lo_[i] - p).cwiseMax(p - hi_[i]).cwiseMax(0.0);
    if (boxGap.squaredNorm() > bestD2) {
      continue;
    }
    const Vec3 c = closestOnTriangle(p, tris_[i][0], tris_[i][1], tris_[i][2]);
    const double d2 = (c - p).squaredNorm();
    if (d2 < bestD2) {
      bestD2 = d2;
      best = {c, i, 0.0};
    }
  }
  best.distance = std::sqrt(bestD2);
  return best;
}

Mesh resolvePenetration(const Mesh& body, const Mesh& cloth, double epsilon,
                        PenetrationReport* report) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::InvalidArgument, "penetration epsilon must be positive");
  }
  checkClosedManifold(body);

  // Orientation from the signed volume; an inward-facing body flips both the
  // winding sign and the face normals.
  double volume = 0.0;
  for (const auto& t : triangulate(body)) {
    volume += body.vertices[t[0]].dot(body.vertices[t[1]].cross(body.vertices[t[2]]));
  }
  const double sign = volume < 0.0 ? -1.0 : 1.0;

  const WindingNumber winding(body);
  const SurfaceQuery surface(body);
  // Small slack keeps a freshly pushed vertex from re-triggering on rounding.
  const double target = epsilon * (1.0 + 1e-9) + 1e-12;

  PenetrationReport rep;
  Mesh out = cloth;
  for (Vec3& p : out.vertices) {
    const Vec3 start = p;
    bool resolved = false;
    for (int iter = 0; iter < 8; ++iter) {
      const bool inside = sign * winding(p) > 0.5;
      const SurfacePoint s = surface.closest(p);
      if (!inside && s.distance >= epsilon) {
        resolved = true;
        break;
      }
      Vec3 dir;
      if (s.distance > 1e-12) {
        dir = (p - s.point) / s.distance;
        if (inside) {
          dir = -dir;
        }
      } else {
        dir = sign * surface.faceNormal(s.triangle);
      }
      p = s.point + target * dir;
    }
    if (!resolved) {
      const bool inside = sign * winding(p) > 0.5;
      resolved = !inside && surface.closest(p).distance >= epsilon;
    }
    if (p != start) {
      ++rep.moved;
      rep.maxDisplacement = std::max(rep.maxDisplacement, (p - start).norm());
    }
    if (!resolved) {
      ++rep.unresolved;
    }
  }
  if (!out.normals.empty()) {
    out.normals = computeVertexNormals(out);
  }
  if (report) {
    *report = rep;
  }
  return out;
}

GarmentAsset prepareGarment(const Mesh& body, const SkinBinding& bodyBinding, const Mesh& cloth,
                            double epsilon, PenetrationReport* report) {
  validateMesh(cloth);
  GarmentAsset g;
  g.mesh = resolvePenetration(body, cloth, epsilon, report);
  g.binding = transferWeights(body, bodyBinding, g.mesh);
  g.offsetEpsilon = epsilon;
  return g;
}

} // namespace avf::skin
