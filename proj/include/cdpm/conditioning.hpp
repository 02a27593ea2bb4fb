#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdpm/geometry.hpp"
#include "cdpm/primitives.hpp"

namespace cdpm {

// H x W x C conditioning image. Default channels: silhouette (0/1),
// depth (normalized to [0,1] over the frame), camera-space surface
// normal x/y/z (each in [-1,1]). Background pixels are all-zero.
// Feature lattice points sit at integer pixel coordinates.
struct FeatureMap {
  int width = 0, height = 0, channels = 0;
  std::vector<float> data;  // ((y * width) + x) * channels + c
  std::vector<std::string> channel_names;

  FeatureMap() = default;
  FeatureMap(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline const std::vector<std::string>& default_channel_names() {
  static const std::vector<std::string> names = {"silhouette", "depth", "normal_x",
                                                 "normal_y", "normal_z"};
  return names;
}

enum class ConditioningMode { kLocal, kGlobal, kGlobalPlusLocal };

ConditioningMode conditioning_mode_from_string(const std::string& s);
std::string to_string(ConditioningMode m);

// Everything needed to produce per-point condition vectors for one item.
// Mask parameters record the occlusion that was applied to fmap (if any).
struct ConditioningContext {
  FeatureMap fmap;
  Camera camera;
  ConditioningMode mode = ConditioningMode::kLocal;
  double mask_ratio = 0.0;
  std::uint64_t mask_seed = 0;
  bool masked = false;

  int condition_width() const {
    return mode == ConditioningMode::kGlobalPlusLocal ? 2 * fmap.channels
                                                      : fmap.channels;
  }
};

ConditioningContext make_context(const FeatureMap& fmap, const Camera& cam,
                                 ConditioningMode mode);
// Same, with mask_ratio of the silhouette-interior pixels zeroed first.
ConditioningContext make_masked_context(const FeatureMap& fmap, const Camera& cam,
                                        ConditioningMode mode, double mask_ratio,
                                        std::uint64_t mask_seed);

// Per-pixel ray casting against the analytic shape. Fills silhouette,
// frame-normalized depth and camera-space normals; background stays zero.
FeatureMap render_feature_map(const PrimitiveShape& shape, const Camera& cam);

// Bilinear sample with zero padding outside [0,W)x[0,H); exact at
// integer lattice points.
Eigen::VectorXd bilinear_sample(const FeatureMap& fmap, double px, double py);

// One C-vector per point: project, then bilinear-sample the map. Points
// behind the camera or projecting outside the frame get the zero vector.
Eigen::MatrixXd gather_local(const ConditioningContext& ctx, const PointCloud& pc);

// Average pool of the per-point local features.
Eigen::VectorXd gather_global(const ConditioningContext& ctx, const PointCloud& pc);

// N x condition_width() matrix assembled per the context mode.
// GlobalPlusLocal concatenates [local | global] per row.
Eigen::MatrixXd build_condition(const ConditioningContext& ctx, const PointCloud& pc);

// Zeroes an exact shuffle-prefix share of silhouette-interior pixels
// across all channels. ratio in [0,1]; deterministic per seed.
FeatureMap apply_mask(const FeatureMap& fmap, double ratio, std::uint64_t seed);

// Flat binary: magic "FMAP", u32 W, H, C little-endian, f32 row-major data.
void write_fmap(const std::filesystem::path& path, const FeatureMap& fmap);
FeatureMap read_fmap(const std::filesystem::path& path);

// 8-bit PGM of one channel, min-max normalized, for visual inspection.
void write_pgm(const std::filesystem::path& path, const FeatureMap& fmap, int channel);

}  // namespace cdpm
