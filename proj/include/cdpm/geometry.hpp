#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace cdpm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// A set of N points in object/world space. Shapes are normalized to fit
// the unit cube [-0.5, 0.5]^3 before diffusion; diffusion states, noise
// tensors and noise predictions all share this representation.
struct PointCloud {
  std::vector<Vec3> points;

  PointCloud() = default;
  explicit PointCloud(std::size_t n) : points(n, Vec3::Zero()) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Vec3& operator[](std::size_t i) { return points[i]; }
  const Vec3& operator[](std::size_t i) const { return points[i]; }

  auto begin() { return points.begin(); }
  auto end() { return points.end(); }
  auto begin() const { return points.begin(); }
  auto end() const { return points.end(); }
};

// Component-wise arithmetic mean (the gravity center). Compensated
// summation in fixed index order, so the result is reproducible and
// accurate to a few ulp regardless of cloud size.
Vec3 centroid(const PointCloud& pc);

// Shifts the cloud so its centroid is the origin. Pairwise differences
// between points are preserved up to one rounding of each coordinate.
PointCloud centralize(const PointCloud& pc);

// True when ||centroid||_inf <= tol. Default tolerance is the double
// precision contract; use 1e-6 for data that passed through float32.
bool is_centered(const PointCloud& pc, double tol = 1e-12);

// Pinhole camera: world -> camera is q = R p + T, pixel = (fx qx/qz + cx,
// fy qy/qz + cy). Pixel y grows downward (image row order).
struct Camera {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  // Throws InvalidInputError unless rotation is orthonormal to 1e-6,
  // focal components are positive and the image has at least one pixel.
  void validate() const;
};

struct Projection {
  std::vector<Vec2> pixels;    // NaN when the point is not in front of the camera
  std::vector<double> depths;  // camera-space z; <= 0 marks an invalid projection

  bool valid(std::size_t i) const { return depths[i] > 0.0; }
};

Projection project(const Camera& cam, const PointCloud& pc);

// Single-point version. Returns the pixel (NaN if behind the camera);
// writes camera-space z to *depth when depth is non-null.
Vec2 project_point(const Camera& cam, const Vec3& p, double* depth = nullptr);

// ASCII XYZ: one "x y z" line per point, full double round-trip precision.
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& pc);

// Binary little-endian PLY, vertex-only element with float32 x/y/z.
PointCloud read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const PointCloud& pc);

}  // namespace cdpm
