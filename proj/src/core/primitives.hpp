#pragma once

#include "geometry.hpp"

namespace avf::primitives {

/// Geodesic sphere from a subdivided icosahedron, outward oriented.
/// Level k has 20 * 4^k triangles.
Mesh icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Icosphere scaled per axis, then rotated and translated.
Mesh ellipsoid(int subdivisions, const Vec3& radii, const Vec3& center,
               const Quat& orientation = Quat::Identity());

/// Cylinder of `segments` around the axis from `a` to `b` with `rings` rows.
/// Capped tubes are closed by a fan at each end; open ones suit garments.
Mesh tube(const Vec3& a, const Vec3& b, double radius, int segments, int rings, bool capped = true);

/// Concatenates meshes, offsetting face indices.
Mesh merge(const std::vector<Mesh>& parts);

} // namespace avf::primitives
