#include "primitives.hpp"

#include "error.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace avf::primitives {

Mesh icosphere(int subdivisions, double radius, const Vec3& center) {
  if (subdivisions < 0 || subdivisions > 7) {
    throw Error(ErrorCode::InvalidArgument, "icosphere subdivision level must be in [0, 7]");
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) {
    p.normalize();
  }
  std::vector<std::array<std::uint32_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      const auto it = mid.find(key);
      if (it != mid.end()) {
        return it->second;
      }
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const std::uint32_t ab = midpoint(tri[0], tri[1]);
      const std::uint32_t bc = midpoint(tri[1], tri[2]);
      const std::uint32_t ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  Mesh m;
  for (const Vec3& p : v) {
    m.vertices.push_back(center + radius * p);
    m.normals.push_back(p);
    const double u = 0.5 + std::atan2(p.z(), p.x()) / (2.0 * std::numbers::pi);
    const double w = 0.5 + std::asin(std::clamp(p.y(), -1.0, 1.0)) / std::numbers::pi;
    m.uvs.emplace_back(u, w);
  }
  for (const auto& tri : f) {
    m.faces.push_back(Face::tri(tri[0], tri[1], tri[2]));
  }
  return m;
}

Mesh ellipsoid(int subdivisions, const Vec3& radii, const Vec3& center, const Quat& orientation) {
  Mesh m = icosphere(subdivisions);
  for (Vec3& p : m.vertices) {
    p = center + orientation * p.cwiseProduct(radii);
  }
  m.normals = computeVertexNormals(m);
  return m;
}

Mesh tube(const Vec3& a, const Vec3& b, double radius, int segments, int rings, bool capped) {
  if (segments < 3 || rings < 2) {
    throw Error(ErrorCode::InvalidArgument, "tube needs at least 3 segments and 2 rings");
  }
  const Vec3 axis = b - a;
  if (axis.norm() < 1e-12) {
    throw Error(ErrorCode::Degenerate, "tube axis has zero length");
  }
  const Vec3 dir = axis.normalized();
  Vec3 side = std::abs(dir.y()) < 0.9 ? Vec3::UnitY().cross(dir) : Vec3::UnitX().cross(dir);
  side.normalize();
  const Vec3 up = dir.cross(side);
  Mesh m;
  for (int r = 0; r < rings; ++r) {
    const Vec3 c = a + axis * (static_cast<double>(r) / (rings - 1));
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      m.vertices.push_back(c + radius * (std::cos(phi) * side + std::sin(phi) * up));
      m.uvs.emplace_back(static_cast<double>(s) / segments, static_cast<double>(r) / (rings - 1));
    }
  }
  const auto id = [&](int r, int s) { return static_cast<std::uint32_t>(r * segments + (s % segments)); };
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      m.faces.push_back(Face::quad(id(r, s), id(r, s + 1), id(r + 1, s + 1), id(r + 1, s)));
    }
  }
  if (!capped) {
    m.normals = computeVertexNormals(m);
    return m;
  }
  const auto capA = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(a - dir * radius * 0.5);
  m.uvs.emplace_back(0.5, 0.0);
  const auto capB = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(b + dir * radius * 0.5);
  m.uvs.emplace_back(0.5, 1.0);
  for (int s = 0; s < segments; ++s) {
    m.faces.push_back(Face::tri(capA, id(0, s + 1), id(0, s)));
    m.faces.push_back(Face::tri(capB, id(rings - 1, s), id(rings - 1, s + 1)));
  }
  m.normals = computeVertexNormals(m);
  return m;
}

Mesh merge(const std::vector<Mesh>& parts) {
  Mesh out;
  bool uvs = true;
  bool normals = true;
  for (const Mesh& p : parts) {
    uvs = uvs && p.uvs.size() == p.vertices.size();
    normals = normals && p.normals.size() == p.vertices.size();
  }
  for (const Mesh& p : parts) {
    const auto offset = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
    if (uvs) {
      out.uvs.insert(out.uvs.end(), p.uvs.begin(), p.uvs.end());
    }
    if (normals) {
      out.normals.insert(out.normals.end(), p.normals.begin(), p.normals.end());
    }
    for (Face f : p.faces) {
      for (int i = 0; i < f.arity; ++i) {
        f.v[i] += offset;
      }
      out.faces.push_back(f);
    }
  }
  return out;
}

} // namespace avf::primitives
