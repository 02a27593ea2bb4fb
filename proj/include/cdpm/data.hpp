#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdpm/conditioning.hpp"
#include "cdpm/geometry.hpp"
#include "cdpm/primitives.hpp"

namespace cdpm {

// Synthetic stand-in for an image/shape pair dataset: analytic primitives
// with surface-sampled ground-truth clouds and rendered feature maps.
struct DatasetItem {
  std::string id;
  PrimitiveKind kind = PrimitiveKind::kSphere;
  PointCloud cloud;  // ground truth, centered
  Camera camera;
  FeatureMap fmap;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::vector<int> train_idx;
  std::vector<int> test_idx;

  std::size_t size() const { return items.size(); }
};

struct DatasetGenConfig {
  int m_items = 350;
  double train_fraction = 0.9;
  int n_points = 256;
  int image_size = 128;
  std::uint64_t seed = 1;

  // Shape half-extent ranges; chosen so every rotated shape fits the
  // unit cube [-0.5, 0.5]^3.
  double sphere_radius_min = 0.15, sphere_radius_max = 0.35;
  double box_half_min = 0.12, box_half_max = 0.25;
  double cyl_radius_min = 0.10, cyl_radius_max = 0.25;
  double cyl_half_height_min = 0.15, cyl_half_height_max = 0.35;

  // Camera on a jittered look-at sphere; focal = 2 * image_size.
  double cam_radius_min = 2.0, cam_radius_max = 2.6;
  double cam_elevation_min_deg = -30.0, cam_elevation_max_deg = 45.0;

  nlohmann::json to_json() const;
  static DatasetGenConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Reproducible: per-item streams derived from the seed, so generation is
// order-independent. Every camera sees its object (non-empty silhouette).
Dataset generate_dataset(const DatasetGenConfig& config);

nlohmann::json camera_to_json(const Camera& cam);
Camera camera_from_json(const nlohmann::json& j);

// Directory layout: manifest.json (config + split + per-file hashes),
// item_XXXX.ply, item_XXXX.fmap, item_XXXX.cam.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                   const DatasetGenConfig& config);

struct LoadedDataset {
  Dataset dataset;
  DatasetGenConfig config;
  nlohmann::json manifest;
};
// Verifies manifest hashes against the files on disk.
LoadedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace cdpm
