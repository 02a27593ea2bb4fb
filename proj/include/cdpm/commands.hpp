#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "cdpm/run_config.hpp"

namespace cdpm {

// Command bodies behind the CLI. All are deterministic per
// (config, seed): rerunning with identical inputs writes byte-identical
// artifacts. Errors surface as exceptions; the CLI maps them to exit
// codes (1 usage, 2 data, 3 numeric divergence).

// Generates the synthetic dataset into config.dataset_dir.
void cmd_generate(const RunConfig& config);

struct TrainOutcome {
  double final_loss = 0.0;
  long long centering_violations = 0;
  std::filesystem::path checkpoint;
};

// Trains per config on config.dataset_dir; writes loss.csv, periodic +
// final checkpoints and train_summary.json under config.out_dir.
// config.mask_ratio > 0 enables occlusion augmentation with per-sample
// ratios in [0, mask_ratio]; config.overfit_fixed trains a fixed
// (x0, cond, t, noise) tuple on item 0.
TrainOutcome cmd_train(const RunConfig& config);

// Samples k reconstructions per item (default: the test split) from a
// checkpoint; writes {item}_{s}.ply and {item}_{s}_drift.csv under
// config.out_dir. config.mask_ratio > 0 masks exactly that share of
// each item's feature map before conditioning.
void cmd_sample(const RunConfig& config, const std::filesystem::path& checkpoint,
                const std::vector<int>& item_ids = {});

// Scores predictions in pred_dir against the dataset's ground truth at
// config.tau; with config.oracle_k > 1 reports both the single-sample
// and best-of-k rows. Writes the JSON report to report_path.
nlohmann::json cmd_eval(const RunConfig& config, const std::filesystem::path& pred_dir,
                        const std::filesystem::path& report_path);

// Seed-paired A/B trial: trains and evaluates both configs (which must
// differ only in `mode`) once per seed, writing comparison.json and
// per-side drift curves under out_dir.
nlohmann::json cmd_compare(const RunConfig& config_a, const RunConfig& config_b,
                           const std::vector<std::uint64_t>& seeds,
                           const std::filesystem::path& out_dir);

// Caps worker threads from the CDPM_THREADS environment variable.
void apply_thread_cap();

}  // namespace cdpm
