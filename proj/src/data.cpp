#include "cdpm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdpm/errors.hpp"
#include "cdpm/hashing.hpp"
#include "cdpm/rng.hpp"

namespace cdpm {

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("file_hash_hex: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

nlohmann::json DatasetGenConfig::to_json() const {
  nlohmann::json j;
  j["m_items"] = m_items;
  j["train_fraction"] = train_fraction;
  j["n_points"] = n_points;
  j["image_size"] = image_size;
  j["seed"] = seed;
  j["sphere_radius"] = {sphere_radius_min, sphere_radius_max};
  j["box_half"] = {box_half_min, box_half_max};
  j["cyl_radius"] = {cyl_radius_min, cyl_radius_max};
  j["cyl_half_height"] = {cyl_half_height_min, cyl_half_height_max};
  j["cam_radius"] = {cam_radius_min, cam_radius_max};
  j["cam_elevation_deg"] = {cam_elevation_min_deg, cam_elevation_max_deg};
  return j;
}

DatasetGenConfig DatasetGenConfig::from_json(const nlohmann::json& j) {
  DatasetGenConfig c;
  c.m_items = j.at("m_items").get<int>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.n_points = j.at("n_points").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  auto pair = [&j](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    lo = j.at(key).at(0).get<double>();
    hi = j.at(key).at(1).get<double>();
  };
  pair("sphere_radius", c.sphere_radius_min, c.sphere_radius_max);
  pair("box_half", c.box_half_min, c.box_half_max);
  pair("cyl_radius", c.cyl_radius_min, c.cyl_radius_max);
  pair("cyl_half_height", c.cyl_half_height_min, c.cyl_half_height_max);
  pair("cam_radius", c.cam_radius_min, c.cam_radius_max);
  pair("cam_elevation_deg", c.cam_elevation_min_deg, c.cam_elevation_max_deg);
  return c;
}

void DatasetGenConfig::validate() const {
  if (m_items < 0) throw InvalidInputError("dataset config: m_items must be >= 0");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw InvalidInputError("dataset config: train_fraction out of [0, 1]");
  if (n_points < 1) throw InvalidInputError("dataset config: n_points must be >= 1");
  if (image_size < 8) throw InvalidInputError("dataset config: image_size must be >= 8");
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0 && lo <= hi))
      throw InvalidInputError(std::string("dataset config: bad range for ") + what);
  };
  range(sphere_radius_min, sphere_radius_max, "sphere_radius");
  range(box_half_min, box_half_max, "box_half");
  range(cyl_radius_min, cyl_radius_max, "cyl_radius");
  range(cyl_half_height_min, cyl_half_height_max, "cyl_half_height");
  range(cam_radius_min, cam_radius_max, "cam_radius");
  if (cam_elevation_min_deg > cam_elevation_max_deg ||
      cam_elevation_min_deg < -80.0 || cam_elevation_max_deg > 80.0)
    throw InvalidInputError("dataset config: camera elevation range out of (-80, 80)");
}

namespace {

Mat3 random_rotation(RandomStream& rng) {
  // Uniform over SO(3) via a normalized Gaussian quaternion.
  double q[4];
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (double& v : q) {
      v = rng.normal();
      norm_sq += v * v;
    }
  } while (norm_sq < 1e-24);
  const double inv = 1.0 / std::sqrt(norm_sq);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

double lerp(double lo, double hi, double u) { return lo + u * (hi - lo); }

Camera lookat_camera(const Vec3& position, int image_size) {
  // World z is up; camera x right, y down, z forward (toward origin).
  const Vec3 forward = (-position).normalized();
  const Vec3 up(0.0, 0.0, 1.0);
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right).normalized();
  Camera cam;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  cam.translation = -(cam.rotation * position);
  cam.fx = cam.fy = 2.0 * image_size;
  cam.cx = image_size / 2.0;
  cam.cy = image_size / 2.0;
  cam.width = cam.height = image_size;
  return cam;
}

PrimitiveShape random_shape(const DatasetGenConfig& cfg, RandomStream& rng) {
  PrimitiveShape shape;
  const int kind = static_cast<int>(rng.uniform_index(3));
  shape.rotation = random_rotation(rng);
  switch (kind) {
    case 0: {
      shape.kind = PrimitiveKind::kSphere;
      const double r = lerp(cfg.sphere_radius_min, cfg.sphere_radius_max, rng.uniform());
      shape.scale = Vec3(r, r, r);
      break;
    }
    case 1: {
      shape.kind = PrimitiveKind::kBox;
      for (int k = 0; k < 3; ++k)
        shape.scale[k] = lerp(cfg.box_half_min, cfg.box_half_max, rng.uniform());
      break;
    }
    default: {
      shape.kind = PrimitiveKind::kCylinder;
      const double r = lerp(cfg.cyl_radius_min, cfg.cyl_radius_max, rng.uniform());
      shape.scale = Vec3(
          r, r, lerp(cfg.cyl_half_height_min, cfg.cyl_half_height_max, rng.uniform()));
      break;
    }
  }
  return shape;
}

std::string item_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "item_%04d", index);
  return buf;
}

bool silhouette_nonempty(const FeatureMap& fmap) {
  for (int y = 0; y < fmap.height; ++y)
    for (int x = 0; x < fmap.width; ++x)
      if (fmap.at(x, y, 0) == 1.0f) return true;
  return false;
}

}  // namespace

Dataset generate_dataset(const DatasetGenConfig& config) {
  config.validate();
  Dataset ds;
  ds.items.resize(static_cast<std::size_t>(config.m_items));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < config.m_items; ++i) {
    RandomStream rng(config.seed, derive_stream(0x4954454dull /* "ITEM" */,
                                                static_cast<std::uint64_t>(i)));
    const PrimitiveShape shape = random_shape(config, rng);

    const double azimuth = rng.uniform() * 6.283185307179586;
    const double elev = lerp(config.cam_elevation_min_deg, config.cam_elevation_max_deg,
                             rng.uniform()) *
                        (3.14159265358979323846 / 180.0);
    const double radius = lerp(config.cam_radius_min, config.cam_radius_max, rng.uniform());
    const Vec3 cam_pos(radius * std::cos(elev) * std::cos(azimuth),
                       radius * std::cos(elev) * std::sin(azimuth),
                       radius * std::sin(elev));

    DatasetItem item;
    item.id = item_id(i);
    item.kind = shape.kind;
    item.camera = lookat_camera(cam_pos, config.image_size);
    item.cloud = centralize(
        sample_surface(shape, static_cast<std::size_t>(config.n_points), rng));
    item.fmap = render_feature_map(shape, item.camera);
    ds.items[static_cast<std::size_t>(i)] = std::move(item);
  }

  // Exceptions cannot leave the parallel loop; validate visibility here.
  for (const DatasetItem& item : ds.items)
    if (!silhouette_nonempty(item.fmap))
      throw InvalidInputError("generate_dataset: camera does not see item " + item.id);

  // Shuffle-prefix split.
  std::vector<int> order(static_cast<std::size_t>(config.m_items));
  for (int i = 0; i < config.m_items; ++i) order[static_cast<std::size_t>(i)] = i;
  RandomStream split_rng(config.seed, 0x53504c4954ull /* "SPLIT" */);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.uniform_index(i)]);
  const std::size_t n_train = static_cast<std::size_t>(
      std::llround(config.train_fraction * static_cast<double>(config.m_items)));
  ds.train_idx.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  ds.test_idx.assign(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
  return ds;
}

nlohmann::json camera_to_json(const Camera& cam) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(3 * i + j)] = cam.rotation(i, j);
  return nlohmann::json{{"R", r},
                        {"T", {cam.translation.x(), cam.translation.y(), cam.translation.z()}},
                        {"fx", cam.fx},
                        {"fy", cam.fy},
                        {"cx", cam.cx},
                        {"cy", cam.cy},
                        {"W", cam.width},
                        {"H", cam.height}};
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  const auto& r = j.at("R");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      cam.rotation(i, k) = r.at(static_cast<std::size_t>(3 * i + k)).get<double>();
  const auto& t = j.at("T");
  cam.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("W").get<int>();
  cam.height = j.at("H").get<int>();
  cam.validate();
  return cam;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                   const DatasetGenConfig& config) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = config.to_json();
  manifest["train"] = ds.train_idx;
  manifest["test"] = ds.test_idx;

  nlohmann::json items = nlohmann::json::array();
  for (const DatasetItem& item : ds.items) {
    const std::string ply = item.id + ".ply";
    const std::string fmap = item.id + ".fmap";
    const std::string cam = item.id + ".cam.json";
    write_ply(dir / ply, item.cloud);
    write_fmap(dir / fmap, item.fmap);
    {
      std::ofstream out(dir / cam);
      out << camera_to_json(item.camera).dump(2) << "\n";
    }
    items.push_back({{"id", item.id},
                     {"kind", to_string(item.kind)},
                     {"ply", ply},
                     {"fmap", fmap},
                     {"camera", cam},
                     {"hash_ply", file_hash_hex(dir / ply)},
                     {"hash_fmap", file_hash_hex(dir / fmap)},
                     {"hash_camera", file_hash_hex(dir / cam)}});
  }
  manifest["items"] = items;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw InvalidInputError("write_dataset: cannot open manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InvalidInputError("read_dataset: missing manifest.json in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.at("format_version").get<int>() != 1)
    throw InvalidInputError("read_dataset: unsupported manifest format version");

  LoadedDataset out;
  out.manifest = manifest;
  out.config = DatasetGenConfig::from_json(manifest.at("config"));
  out.dataset.train_idx = manifest.at("train").get<std::vector<int>>();
  out.dataset.test_idx = manifest.at("test").get<std::vector<int>>();

  for (const auto& entry : manifest.at("items")) {
    DatasetItem item;
    item.id = entry.at("id").get<std::string>();
    item.kind = primitive_kind_from_string(entry.at("kind").get<std::string>());
    auto check = [&](const char* file_key, const char* hash_key) {
      const std::filesystem::path p = dir / entry.at(file_key).get<std::string>();
      if (file_hash_hex(p) != entry.at(hash_key).get<std::string>())
        throw InvalidInputError("read_dataset: hash mismatch for " + p.string());
      return p;
    };
    item.cloud = read_ply(check("ply", "hash_ply"));
    item.fmap = read_fmap(check("fmap", "hash_fmap"));
    {
      std::ifstream cam_in(check("camera", "hash_camera"));
      item.camera = camera_from_json(nlohmann::json::parse(cam_in));
    }
    out.dataset.items.push_back(std::move(item));
  }
  return out;
}

}  // namespace cdpm
