#include "cdpm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cdpm/errors.hpp"
#include "cdpm/hashing.hpp"
#include "cdpm/metrics.hpp"

namespace cdpm {
namespace fs = std::filesystem;

void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* env = std::getenv("CDPM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

namespace {

LoadedDataset load_dataset_checked(const RunConfig& config) {
  if (config.dataset_dir.empty())
    throw InvalidInputError("config.dataset_dir is not set");
  if (!fs::exists(fs::path(config.dataset_dir) / "manifest.json"))
    throw InvalidInputError("dataset not found at " + config.dataset_dir);
  LoadedDataset loaded = read_dataset(config.dataset_dir);
  for (const DatasetItem& item : loaded.dataset.items)
    if (static_cast<int>(item.cloud.size()) != config.n_points)
      throw InvalidInputError("dataset item " + item.id + " has " +
                              std::to_string(item.cloud.size()) + " points, config expects " +
                              std::to_string(config.n_points));
  return loaded;
}

int fmap_channels(const Dataset& ds) {
  return ds.items.empty() ? 5 : ds.items[0].fmap.channels;
}

struct TrainedModel {
  Denoiser net;
  double final_loss = 0.0;
  long long centering_violations = 0;
  std::vector<std::pair<double, double>> loss_curve;  // (loss, lr)
};

// Called after the optimizer update for 1-based step counts.
using SnapshotFn = std::function<void(long long, const Denoiser&)>;

// Core training loop shared by cmd_train and cmd_compare.
TrainedModel train_model(const RunConfig& config, const LoadedDataset& loaded,
                         const SnapshotFn& snapshot = {}) {
  const Dataset& ds = loaded.dataset;
  if (ds.train_idx.empty())
    throw InvalidInputError("train: dataset has an empty train split");

  const NoiseSchedule sched = config.make_schedule();
  const ArchitectureConfig arch = config.resolved_arch(fmap_channels(ds));
  TrainedModel model{Denoiser(arch, derive_stream(config.seed, 0x4e4554ull /* "NET" */)),
                     0.0, 0, {}};

  AdamW opt(model.net, config.optimizer);

  std::vector<ConditioningContext> contexts;
  contexts.reserve(ds.items.size());
  for (const DatasetItem& item : ds.items)
    contexts.push_back(make_context(item.fmap, item.camera, config.cond));

  TrainingOptions topts;
  topts.mode = config.mode;
  topts.mask_max = config.mask_ratio;
  topts.fixed_tuple = config.overfit_fixed;
  const int batch_size = config.overfit_fixed ? 1 : config.batch_size;

  RandomStream batch_rng(config.seed, 0x4241544348ull /* "BATCH" */);
  model.loss_curve.reserve(static_cast<std::size_t>(config.train_steps));

  for (long long step = 0; step < config.train_steps; ++step) {
    std::vector<TrainingItem> batch(static_cast<std::size_t>(batch_size));
    for (auto& slot : batch) {
      const int idx = config.overfit_fixed
                          ? ds.train_idx[0]
                          : ds.train_idx[batch_rng.uniform_index(ds.train_idx.size())];
      slot.x0 = &ds.items[static_cast<std::size_t>(idx)].cloud;
      slot.ctx = &contexts[static_cast<std::size_t>(idx)];
    }

    TrainingStats stats;
    const double loss = training_step(sched, model.net, batch, topts, config.seed,
                                      static_cast<std::uint64_t>(step), &stats);
    if (config.mode == DiffusionMode::kCdpm && stats.max_center_violation > 1e-12)
      ++model.centering_violations;

    const double lr = opt.learning_rate(step);
    opt.step(model.net);
    model.loss_curve.emplace_back(loss, lr);
    model.final_loss = loss;
    if (snapshot) snapshot(step + 1, model.net);
  }
  return model;
}

void write_loss_csv(const fs::path& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open " + path.string());
  out << "step,loss,lr\n";
  char buf[96];
  for (std::size_t i = 0; i < model.loss_curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, model.loss_curve[i].first,
                  model.loss_curve[i].second);
    out << buf;
  }
}

std::string sample_name(const std::string& id, int s) {
  return id + "_" + std::to_string(s);
}

ConditioningContext item_context(const RunConfig& config, const DatasetItem& item,
                                 int item_index) {
  if (config.mask_ratio > 0.0)
    return make_masked_context(
        item.fmap, item.camera, config.cond, config.mask_ratio,
        derive_stream(config.seed, 0x4d41534bull /* "MASK" */,
                      static_cast<std::uint64_t>(item_index)));
  return make_context(item.fmap, item.camera, config.cond);
}

nlohmann::json metric_block(const std::string& category,
                            const std::vector<nlohmann::json>& per_item,
                            double chamfer_sum, double f_sum, double p_sum, double r_sum,
                            double tau) {
  const double n = std::max<std::size_t>(per_item.size(), 1);
  return nlohmann::json{{"category", category},
                        {"n_items", per_item.size()},
                        {"chamfer_mean", chamfer_sum / n},
                        {"fscore_mean", f_sum / n},
                        {"precision_mean", p_sum / n},
                        {"recall_mean", r_sum / n},
                        {"tau", tau},
                        {"convention", "squared"},
                        {"per_item", per_item}};
}

}  // namespace

void cmd_generate(const RunConfig& config) {
  config.validate();
  if (config.dataset_dir.empty())
    throw InvalidInputError("cmd_generate: config.dataset_dir is not set");
  const Dataset ds = generate_dataset(config.dataset_gen);
  write_dataset(config.dataset_dir, ds, config.dataset_gen);
}

TrainOutcome cmd_train(const RunConfig& config) {
  config.validate();
  if (config.out_dir.empty()) throw InvalidInputError("cmd_train: config.out_dir is not set");
  const LoadedDataset loaded = load_dataset_checked(config);
  fs::create_directories(config.out_dir);

  const fs::path out_dir(config.out_dir);
  SnapshotFn snapshot;
  if (config.checkpoint_every > 0) {
    nlohmann::json snap_meta;
    snap_meta["format_version"] = 1;
    snap_meta["run_config"] = config.to_json();
    snapshot = [&out_dir, &config, snap_meta](long long step, const Denoiser& net) {
      if (step % config.checkpoint_every != 0 || step == config.train_steps) return;
      nlohmann::json meta = snap_meta;
      meta["step"] = step;
      write_checkpoint(out_dir / ("checkpoint_step" + std::to_string(step) + ".ckpt"),
                       net, meta);
    };
  }

  const TrainedModel model = train_model(config, loaded, snapshot);
  write_loss_csv(out_dir / "loss.csv", model);

  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["run_config"] = config.to_json();
  meta["final_loss"] = model.final_loss;
  meta["centering_violations"] = model.centering_violations;
  meta["step"] = config.train_steps;

  const fs::path ckpt = out_dir / "checkpoint_final.ckpt";
  write_checkpoint(ckpt, model.net, meta);

  std::ofstream summary(out_dir / "train_summary.json");
  summary << meta.dump(2) << "\n";

  return {model.final_loss, model.centering_violations, ckpt};
}

void cmd_sample(const RunConfig& config, const fs::path& checkpoint,
                const std::vector<int>& item_ids) {
  config.validate();
  if (config.out_dir.empty()) throw InvalidInputError("cmd_sample: config.out_dir is not set");
  const LoadedDataset loaded = load_dataset_checked(config);
  const Dataset& ds = loaded.dataset;

  CheckpointData ckpt = read_checkpoint(checkpoint);
  const ArchitectureConfig expected = config.resolved_arch(fmap_channels(ds));
  if (!(ckpt.arch == expected))
    throw InvalidInputError("cmd_sample: checkpoint architecture does not match config");

  const NoiseSchedule sched = config.make_schedule();
  const DenoiserPredictor predictor(ckpt.net, sched.T);
  fs::create_directories(config.out_dir);

  std::vector<int> ids = item_ids.empty() ? ds.test_idx : item_ids;
  for (int idx : ids)
    if (idx < 0 || idx >= static_cast<int>(ds.items.size()))
      throw InvalidInputError("cmd_sample: item index " + std::to_string(idx) +
                              " out of range");

  const fs::path out_dir(config.out_dir);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const int idx = ids[j];
    const DatasetItem& item = ds.items[static_cast<std::size_t>(idx)];
    const ConditioningContext ctx = item_context(config, item, idx);
    for (int s = 0; s < config.oracle_k; ++s) {
      const std::uint64_t chain_seed =
          derive_stream(config.seed, static_cast<std::uint64_t>(idx),
                        static_cast<std::uint64_t>(s));
      const ChainResult result =
          sample_chain(sched, predictor, &ctx, static_cast<std::size_t>(config.n_points),
                       config.mode, chain_seed);
      write_ply(out_dir / (sample_name(item.id, s) + ".ply"), result.cloud);
      write_trace_csv(out_dir / (sample_name(item.id, s) + "_drift.csv"), result.trace);
    }
  }
}

nlohmann::json cmd_eval(const RunConfig& config, const fs::path& pred_dir,
                        const fs::path& report_path) {
  config.validate();
  const LoadedDataset loaded = load_dataset_checked(config);
  const Dataset& ds = loaded.dataset;
  const int k = config.oracle_k;

  // Missing predictions are reported together, listed by id.
  std::string missing;
  for (int idx : ds.test_idx) {
    const DatasetItem& item = ds.items[static_cast<std::size_t>(idx)];
    for (int s = 0; s < k; ++s)
      if (!fs::exists(pred_dir / (sample_name(item.id, s) + ".ply")))
        missing += (missing.empty() ? "" : ", ") + sample_name(item.id, s);
  }
  if (!missing.empty())
    throw InvalidInputError("cmd_eval: missing predictions: " + missing);

  std::vector<nlohmann::json> single_items, oracle_items;
  double s_cd = 0, s_f = 0, s_p = 0, s_r = 0;
  double o_cd = 0, o_f = 0, o_p = 0, o_r = 0;

  for (int idx : ds.test_idx) {
    const DatasetItem& item = ds.items[static_cast<std::size_t>(idx)];
    std::vector<PointCloud> preds;
    preds.reserve(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s)
      preds.push_back(read_ply(pred_dir / (sample_name(item.id, s) + ".ply")));

    const MetricReport single = fscore(preds[0], item.cloud, config.tau);
    const double single_cd = chamfer(preds[0], item.cloud);
    single_items.push_back({{"id", item.id},
                            {"kind", to_string(item.kind)},
                            {"chamfer", single_cd},
                            {"fscore", single.fscore},
                            {"precision", single.precision},
                            {"recall", single.recall}});
    s_cd += single_cd;
    s_f += single.fscore;
    s_p += single.precision;
    s_r += single.recall;

    if (k > 1) {
      const OracleResult best = oracle_best(preds, item.cloud, config.tau);
      const double best_cd = chamfer(preds[best.index], item.cloud);
      oracle_items.push_back({{"id", item.id},
                              {"kind", to_string(item.kind)},
                              {"best_index", best.index},
                              {"chamfer", best_cd},
                              {"fscore", best.report.fscore},
                              {"precision", best.report.precision},
                              {"recall", best.report.recall}});
      o_cd += best_cd;
      o_f += best.report.fscore;
      o_p += best.report.precision;
      o_r += best.report.recall;
    }
  }

  nlohmann::json report;
  report["format_version"] = 1;
  report["run_config"] = config.to_json();
  report["oracle_k"] = k;
  report["single"] =
      metric_block("all", single_items, s_cd, s_f, s_p, s_r, config.tau);
  if (k > 1)
    report["oracle"] =
        metric_block("all", oracle_items, o_cd, o_f, o_p, o_r, config.tau);

  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw InvalidInputError("cmd_eval: cannot open " + report_path.string());
    out << report.dump(2) << "\n";
  }
  return report;
}

nlohmann::json cmd_compare(const RunConfig& config_a, const RunConfig& config_b,
                           const std::vector<std::uint64_t>& seeds,
                           const fs::path& out_dir) {
  config_a.validate();
  config_b.validate();
  if (seeds.empty()) throw InvalidInputError("cmd_compare: empty seed list");
  {
    nlohmann::json ja = config_a.to_json(), jb = config_b.to_json();
    ja.erase("mode");
    jb.erase("mode");
    if (ja != jb)
      throw InvalidInputError(
          "cmd_compare: configs differ beyond the mode field; refused");
  }

  const LoadedDataset loaded = load_dataset_checked(config_a);
  const Dataset& ds = loaded.dataset;
  if (ds.test_idx.empty())
    throw InvalidInputError("cmd_compare: dataset has an empty test split");
  fs::create_directories(out_dir);

  const NoiseSchedule sched = config_a.make_schedule();

  struct SideResult {
    double fscore_mean = 0.0;
    double chamfer_mean = 0.0;
    double terminal_centroid_mean = 0.0;
  };

  auto run_side = [&](RunConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    const TrainedModel model = train_model(cfg, loaded);
    const DenoiserPredictor predictor(model.net, sched.T);

    SideResult res;
    std::vector<double> fs_items(ds.test_idx.size()), cd_items(ds.test_idx.size()),
        tc_items(ds.test_idx.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t j = 0; j < ds.test_idx.size(); ++j) {
      const int idx = ds.test_idx[j];
      const DatasetItem& item = ds.items[static_cast<std::size_t>(idx)];
      const ConditioningContext ctx = make_context(item.fmap, item.camera, cfg.cond);
      const std::uint64_t chain_seed =
          derive_stream(cfg.seed, static_cast<std::uint64_t>(idx), 0);
      const ChainResult chain =
          sample_chain(sched, predictor, &ctx, static_cast<std::size_t>(cfg.n_points),
                       cfg.mode, chain_seed);
      fs_items[j] = fscore(chain.cloud, item.cloud, cfg.tau).fscore;
      cd_items[j] = chamfer(chain.cloud, item.cloud);
      tc_items[j] = chain.trace.back().centroid.lpNorm<Eigen::Infinity>();

      if (j == 0) {
        const DriftReport drift = drift_stats(chain.trace, item.camera);
        (void)drift;
        write_trace_csv(out_dir / ("drift_" + to_string(cfg.mode) + "_seed" +
                                   std::to_string(seed) + ".csv"),
                        chain.trace);
      }
    }
    for (std::size_t j = 0; j < ds.test_idx.size(); ++j) {
      res.fscore_mean += fs_items[j];
      res.chamfer_mean += cd_items[j];
      res.terminal_centroid_mean += tc_items[j];
    }
    const double n = static_cast<double>(ds.test_idx.size());
    res.fscore_mean /= n;
    res.chamfer_mean /= n;
    res.terminal_centroid_mean /= n;
    return res;
  };

  nlohmann::json rows = nlohmann::json::array();
  int fscore_wins_a = 0, chamfer_wins_a = 0;
  double fa_mean = 0, fb_mean = 0, ca_mean = 0, cb_mean = 0;

  for (std::uint64_t seed : seeds) {
    const SideResult a = run_side(config_a, seed);
    const SideResult b = run_side(config_b, seed);
    rows.push_back({{"seed", seed},
                    {"fscore_a", a.fscore_mean},
                    {"fscore_b", b.fscore_mean},
                    {"chamfer_a", a.chamfer_mean},
                    {"chamfer_b", b.chamfer_mean},
                    {"terminal_centroid_a", a.terminal_centroid_mean},
                    {"terminal_centroid_b", b.terminal_centroid_mean}});
    if (a.fscore_mean >= b.fscore_mean) ++fscore_wins_a;
    if (a.chamfer_mean <= b.chamfer_mean) ++chamfer_wins_a;
    fa_mean += a.fscore_mean;
    fb_mean += b.fscore_mean;
    ca_mean += a.chamfer_mean;
    cb_mean += b.chamfer_mean;
  }
  const double n_seeds = static_cast<double>(seeds.size());

  nlohmann::json report;
  report["format_version"] = 1;
  report["config_a"] = config_a.to_json();
  report["config_b"] = config_b.to_json();
  report["seeds"] = seeds;
  report["rows"] = rows;
  report["summary"] = {{"fscore_wins_a", fscore_wins_a},
                       {"chamfer_wins_a", chamfer_wins_a},
                       {"fscore_mean_a", fa_mean / n_seeds},
                       {"fscore_mean_b", fb_mean / n_seeds},
                       {"chamfer_mean_a", ca_mean / n_seeds},
                       {"chamfer_mean_b", cb_mean / n_seeds}};

  std::ofstream out(out_dir / "comparison.json");
  if (!out)
    throw InvalidInputError("cmd_compare: cannot open " +
                            (out_dir / "comparison.json").string());
  out << report.dump(2) << "\n";
  return report;
}

}  // namespace cdpm
