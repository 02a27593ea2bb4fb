#include "cdpm/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "cdpm/errors.hpp"
#include "cdpm/rng.hpp"

namespace cdpm {

ConditioningMode conditioning_mode_from_string(const std::string& s) {
  if (s == "L") return ConditioningMode::kLocal;
  if (s == "G") return ConditioningMode::kGlobal;
  if (s == "GL" || s == "G+L") return ConditioningMode::kGlobalPlusLocal;
  throw InvalidInputError("unknown conditioning mode '" + s + "' (want L, G or GL)");
}

std::string to_string(ConditioningMode m) {
  switch (m) {
    case ConditioningMode::kLocal: return "L";
    case ConditioningMode::kGlobal: return "G";
    case ConditioningMode::kGlobalPlusLocal: return "GL";
  }
  return "?";
}

ConditioningContext make_context(const FeatureMap& fmap, const Camera& cam,
                                 ConditioningMode mode) {
  ConditioningContext ctx;
  ctx.fmap = fmap;
  ctx.camera = cam;
  ctx.mode = mode;
  return ctx;
}

ConditioningContext make_masked_context(const FeatureMap& fmap, const Camera& cam,
                                        ConditioningMode mode, double mask_ratio,
                                        std::uint64_t mask_seed) {
  ConditioningContext ctx;
  ctx.fmap = apply_mask(fmap, mask_ratio, mask_seed);
  ctx.camera = cam;
  ctx.mode = mode;
  ctx.mask_ratio = mask_ratio;
  ctx.mask_seed = mask_seed;
  ctx.masked = true;
  return ctx;
}

FeatureMap render_feature_map(const PrimitiveShape& shape, const Camera& cam) {
  shape.validate();
  cam.validate();

  FeatureMap fmap(cam.width, cam.height, 5);
  fmap.channel_names = default_channel_names();

  // Camera center and inverse rotation for ray directions.
  const Mat3 r_inv = cam.rotation.transpose();
  const Vec3 center = -(r_inv * cam.translation);

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  std::vector<double> depth_raw(static_cast<std::size_t>(cam.width) * cam.height, 0.0);

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      // Ray through the feature lattice point (x, y).
      const Vec3 dir_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const Vec3 dir = (r_inv * dir_cam).normalized();
      const RayHit hit = intersect(shape, center, dir);
      if (!hit.hit) continue;
      const Vec3 p = center + hit.t * dir;
      const double depth = (cam.rotation * p + cam.translation).z();
      if (depth <= 0.0) continue;
      const Vec3 n_cam = cam.rotation * hit.normal_world;
      fmap.at(x, y, 0) = 1.0f;
      depth_raw[static_cast<std::size_t>(y) * cam.width + x] = depth;
      fmap.at(x, y, 2) = static_cast<float>(n_cam.x());
      fmap.at(x, y, 3) = static_cast<float>(n_cam.y());
      fmap.at(x, y, 4) = static_cast<float>(n_cam.z());
      dmin = std::min(dmin, depth);
      dmax = std::max(dmax, depth);
    }
  }

  if (dmax >= dmin) {
    const double span = std::max(dmax - dmin, 1e-12);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        if (fmap.at(x, y, 0) > 0.0f) {
          const double d = depth_raw[static_cast<std::size_t>(y) * cam.width + x];
          fmap.at(x, y, 1) = static_cast<float>((d - dmin) / span);
        }
  }
  return fmap;
}

Eigen::VectorXd bilinear_sample(const FeatureMap& fmap, double px, double py) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(fmap.channels);
  const int x0 = static_cast<int>(std::floor(px));
  const int y0 = static_cast<int>(std::floor(py));
  const double wx = px - x0;
  const double wy = py - y0;
  const double weights[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (weights[k] == 0.0) continue;
    if (xs[k] < 0 || xs[k] >= fmap.width || ys[k] < 0 || ys[k] >= fmap.height)
      continue;  // outside lattice contributes zero
    for (int c = 0; c < fmap.channels; ++c)
      out[c] += weights[k] * fmap.at(xs[k], ys[k], c);
  }
  return out;
}

Eigen::MatrixXd gather_local(const ConditioningContext& ctx, const PointCloud& pc) {
  const int c = ctx.fmap.channels;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pc.size()), c);
  const Projection pr = project(ctx.camera, pc);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!pr.valid(i)) continue;
    const double px = pr.pixels[i].x();
    const double py = pr.pixels[i].y();
    if (px < 0.0 || px >= ctx.fmap.width || py < 0.0 || py >= ctx.fmap.height)
      continue;
    out.row(static_cast<Eigen::Index>(i)) = bilinear_sample(ctx.fmap, px, py).transpose();
  }
  return out;
}

Eigen::VectorXd gather_global(const ConditioningContext& ctx, const PointCloud& pc) {
  const Eigen::MatrixXd local = gather_local(ctx, pc);
  if (local.rows() == 0) return Eigen::VectorXd::Zero(ctx.fmap.channels);
  return local.colwise().mean();
}

Eigen::MatrixXd build_condition(const ConditioningContext& ctx, const PointCloud& pc) {
  const Eigen::MatrixXd local = gather_local(ctx, pc);
  switch (ctx.mode) {
    case ConditioningMode::kLocal:
      return local;
    case ConditioningMode::kGlobal: {
      Eigen::MatrixXd out(local.rows(), local.cols());
      const Eigen::RowVectorXd g =
          local.rows() ? Eigen::RowVectorXd(local.colwise().mean())
                       : Eigen::RowVectorXd::Zero(local.cols());
      out.rowwise() = g;
      return out;
    }
    case ConditioningMode::kGlobalPlusLocal: {
      Eigen::MatrixXd out(local.rows(), 2 * local.cols());
      const Eigen::RowVectorXd g =
          local.rows() ? Eigen::RowVectorXd(local.colwise().mean())
                       : Eigen::RowVectorXd::Zero(local.cols());
      out.leftCols(local.cols()) = local;
      out.rightCols(local.cols()).rowwise() = g;
      return out;
    }
  }
  return local;
}

FeatureMap apply_mask(const FeatureMap& fmap, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw InvalidInputError("apply_mask: ratio must be in [0, 1]");
  FeatureMap out = fmap;
  if (ratio == 0.0 || fmap.channels == 0) return out;

  std::vector<std::size_t> interior;
  for (int y = 0; y < fmap.height; ++y)
    for (int x = 0; x < fmap.width; ++x)
      if (fmap.at(x, y, 0) == 1.0f)
        interior.push_back(static_cast<std::size_t>(y) * fmap.width + x);

  const std::size_t n_zero =
      std::min(interior.size(),
               static_cast<std::size_t>(std::llround(ratio * static_cast<double>(interior.size()))));

  // Fisher-Yates, then zero the prefix: exact count per ratio.
  RandomStream rng(seed, 0x4d41534bull /* "MASK" */);
  for (std::size_t i = interior.size(); i > 1; --i)
    std::swap(interior[i - 1], interior[rng.uniform_index(i)]);
  for (std::size_t i = 0; i < n_zero; ++i) {
    float* px = &out.data[interior[i] * fmap.channels];
    std::fill(px, px + fmap.channels, 0.0f);
  }
  return out;
}

void write_fmap(const std::filesystem::path& path, const FeatureMap& fmap) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("write_fmap: cannot open " + path.string());
  const char magic[4] = {'F', 'M', 'A', 'P'};
  out.write(magic, 4);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(fmap.width),
                                 static_cast<std::uint32_t>(fmap.height),
                                 static_cast<std::uint32_t>(fmap.channels)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(fmap.data.data()),
            static_cast<std::streamsize>(fmap.data.size() * sizeof(float)));
}

FeatureMap read_fmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("read_fmap: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "FMAP", 4) != 0)
    throw InvalidInputError("read_fmap: bad magic in " + path.string());
  std::uint32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (in.gcount() != sizeof(dims))
    throw InvalidInputError("read_fmap: truncated header in " + path.string());
  FeatureMap fmap(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                  static_cast<int>(dims[2]));
  fmap.channel_names = default_channel_names();
  in.read(reinterpret_cast<char*>(fmap.data.data()),
          static_cast<std::streamsize>(fmap.data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(fmap.data.size() * sizeof(float)))
    throw InvalidInputError("read_fmap: truncated data in " + path.string());
  return fmap;
}

void write_pgm(const std::filesystem::path& path, const FeatureMap& fmap, int channel) {
  if (channel < 0 || channel >= fmap.channels)
    throw InvalidInputError("write_pgm: channel out of range");
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (int y = 0; y < fmap.height; ++y)
    for (int x = 0; x < fmap.width; ++x) {
      lo = std::min(lo, fmap.at(x, y, channel));
      hi = std::max(hi, fmap.at(x, y, channel));
    }
  const float span = (hi > lo) ? hi - lo : 1.0f;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("write_pgm: cannot open " + path.string());
  out << "P5\n" << fmap.width << " " << fmap.height << "\n255\n";
  for (int y = 0; y < fmap.height; ++y)
    for (int x = 0; x < fmap.width; ++x) {
      const float v = (fmap.at(x, y, channel) - lo) / span;
      out.put(static_cast<char>(std::lround(v * 255.0f)));
    }
}

}  // namespace cdpm
