#pragma once

#include <cstdint>
#include <string>

#include "cdpm/geometry.hpp"
#include "cdpm/rng.hpp"

namespace cdpm {

enum class PrimitiveKind { kSphere, kBox, kCylinder };

PrimitiveKind primitive_kind_from_string(const std::string& s);
std::string to_string(PrimitiveKind k);

// Analytic primitive centered at the origin. scale holds per-axis
// half-extents: sphere radii (ellipsoid when anisotropic), box half
// side lengths, cylinder (rx, ry, half-height) with the axis along
// object-space z. rotation maps object space to world space.
struct PrimitiveShape {
  PrimitiveKind kind = PrimitiveKind::kSphere;
  Vec3 scale = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();

  // Throws InvalidInputError on non-positive scale or non-orthonormal rotation.
  void validate() const;
};

struct RayHit {
  bool hit = false;
  double t = 0.0;       // distance along the (unit) ray direction
  Vec3 normal_world;    // unit outward surface normal
};

// First intersection of the ray origin + t * dir (t > 0) with the shape.
// dir must be unit length.
RayHit intersect(const PrimitiveShape& shape, const Vec3& origin, const Vec3& dir);

// n points uniform by surface area. Spheres draw normalized Gaussian
// directions (with an area-density rejection step when the scale is
// anisotropic); boxes pick faces by area; cylinders pick side/caps by
// area with arc-length rejection on elliptic sides.
PointCloud sample_surface(const PrimitiveShape& shape, std::size_t n, RandomStream& rng);

}  // namespace cdpm
