#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cdpm/conditioning.hpp"
#include "cdpm/data.hpp"
#include "cdpm/denoiser.hpp"
#include "cdpm/diffusion.hpp"
#include "cdpm/schedule.hpp"

namespace cdpm {

inline constexpr int kRunConfigVersion = 1;

// One experiment's full recipe. Serialized verbatim into every artifact
// (datasets, checkpoints, reports) for provenance; loaders reject
// mismatched format versions.
struct RunConfig {
  DiffusionMode mode = DiffusionMode::kCdpm;
  ConditioningMode cond = ConditioningMode::kLocal;
  std::uint64_t seed = 1;

  int n_points = 256;
  int batch_size = 16;
  long long train_steps = 8000;
  long long checkpoint_every = 0;  // 0: final checkpoint only

  double mask_ratio = 0.0;  // train: augmentation cap; sample/eval: fixed ratio
  bool overfit_fixed = false;

  double tau = 0.01;
  int oracle_k = 1;

  std::string dataset_dir;
  std::string out_dir;

  // schedule
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SigmaMode sigma_mode = SigmaMode::kBeta;

  ArchitectureConfig arch;
  OptimizerConfig optimizer;
  DatasetGenConfig dataset_gen;

  NoiseSchedule make_schedule() const;
  // Architecture with cond_width resolved from the conditioning mode
  // (channels is the feature-map channel count, default 5).
  ArchitectureConfig resolved_arch(int channels = 5) const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;
};

// Paper-scale defaults: T=1000, N=8192, batch 16, 100K steps, 2K warmup.
RunConfig paper_run_config();

// Desk-scale profile: M=350, N=256, T=100, batch 16, 8000 steps,
// warmup 400 (the paper schedule's 4% warmup share preserved), reduced
// network width so paired comparisons finish on a laptop-class CPU.
RunConfig desk_run_config();

}  // namespace cdpm
