#include "cdpm/geometry.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "cdpm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "PLY and FMAP readers assume a little-endian host");

namespace cdpm {

Vec3 centroid(const PointCloud& pc) {
  if (pc.empty()) throw InvalidInputError("centroid: empty point cloud");
  // Kahan summation per coordinate, fixed index order.
  Vec3 sum = Vec3::Zero();
  Vec3 comp = Vec3::Zero();
  for (const Vec3& p : pc) {
    for (int k = 0; k < 3; ++k) {
      const double y = p[k] - comp[k];
      const double t = sum[k] + y;
      comp[k] = (t - sum[k]) - y;
      sum[k] = t;
    }
  }
  return sum / static_cast<double>(pc.size());
}

PointCloud centralize(const PointCloud& pc) {
  const Vec3 c = centroid(pc);
  PointCloud out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) out[i] = pc[i] - c;
  return out;
}

bool is_centered(const PointCloud& pc, double tol) {
  return centroid(pc).lpNorm<Eigen::Infinity>() <= tol;
}

void Camera::validate() const {
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (err.lpNorm<Eigen::Infinity>() > 1e-6)
    throw InvalidInputError("Camera: rotation is not orthonormal");
  if (!(fx > 0.0) || !(fy > 0.0))
    throw InvalidInputError("Camera: focal components must be positive");
  if (width < 1 || height < 1)
    throw InvalidInputError("Camera: image must be at least 1x1");
}

Vec2 project_point(const Camera& cam, const Vec3& p, double* depth) {
  const Vec3 q = cam.rotation * p + cam.translation;
  if (depth) *depth = q.z();
  if (q.z() > 0.0)
    return {cam.fx * q.x() / q.z() + cam.cx, cam.fy * q.y() / q.z() + cam.cy};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan};
}

Projection project(const Camera& cam, const PointCloud& pc) {
  Projection pr;
  pr.pixels.resize(pc.size());
  pr.depths.resize(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i)
    pr.pixels[i] = project_point(cam, pc[i], &pr.depths[i]);
  return pr;
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("read_xyz: cannot open " + path.string());
  PointCloud pc;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z()))
      throw InvalidInputError("read_xyz: malformed line in " + path.string());
    pc.points.push_back(p);
  }
  return pc;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& pc) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_xyz: cannot open " + path.string());
  char buf[96];
  for (const Vec3& p : pc) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("read_ply: cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw InvalidInputError("read_ply: missing ply magic in " + path.string());

  long long n_vertices = -1;
  bool binary_le = false;
  std::vector<std::string> properties;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = (fmt == "binary_little_endian");
    } else if (tok == "element") {
      std::string name;
      ls >> name >> n_vertices;
      if (name != "vertex")
        throw InvalidInputError("read_ply: unsupported element '" + name + "'");
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float")
        throw InvalidInputError("read_ply: unsupported property type '" + type + "'");
      properties.push_back(name);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!binary_le) throw InvalidInputError("read_ply: expected binary_little_endian format");
  if (n_vertices < 0) throw InvalidInputError("read_ply: missing vertex element");
  if (properties != std::vector<std::string>{"x", "y", "z"})
    throw InvalidInputError("read_ply: expected exactly float x, y, z properties");

  PointCloud pc(static_cast<std::size_t>(n_vertices));
  std::vector<float> raw(static_cast<std::size_t>(n_vertices) * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
    throw InvalidInputError("read_ply: truncated vertex data in " + path.string());
  for (std::size_t i = 0; i < pc.size(); ++i)
    pc[i] = Vec3(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
  return pc;
}

void write_ply(const std::filesystem::path& path, const PointCloud& pc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("write_ply: cannot open " + path.string());
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << pc.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "end_header\n";
  std::vector<float> raw(pc.size() * 3);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    raw[3 * i] = static_cast<float>(pc[i].x());
    raw[3 * i + 1] = static_cast<float>(pc[i].y());
    raw[3 * i + 2] = static_cast<float>(pc[i].z());
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

}  // namespace cdpm
