#include "cdpm/run_config.hpp"

#include <fstream>

#include "cdpm/errors.hpp"

namespace cdpm {

NoiseSchedule RunConfig::make_schedule() const {
  return linear_schedule(T, beta_start, beta_end, sigma_mode);
}

ArchitectureConfig RunConfig::resolved_arch(int channels) const {
  ArchitectureConfig a = arch;
  a.cond_width =
      (cond == ConditioningMode::kGlobalPlusLocal) ? 2 * channels : channels;
  return a;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["format_version"] = kRunConfigVersion;
  j["mode"] = to_string(mode);
  j["cond"] = to_string(cond);
  j["seed"] = seed;
  j["n_points"] = n_points;
  j["batch_size"] = batch_size;
  j["train_steps"] = train_steps;
  j["checkpoint_every"] = checkpoint_every;
  j["mask_ratio"] = mask_ratio;
  j["overfit_fixed"] = overfit_fixed;
  j["tau"] = tau;
  j["oracle_k"] = oracle_k;
  j["dataset_dir"] = dataset_dir;
  j["out_dir"] = out_dir;
  j["schedule"] = {{"T", T},
                   {"beta_start", beta_start},
                   {"beta_end", beta_end},
                   {"sigma_mode", to_string(sigma_mode)}};
  j["arch"] = arch.to_json();
  j["optimizer"] = optimizer.to_json();
  j["dataset_gen"] = dataset_gen.to_json();
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != kRunConfigVersion)
    throw InvalidInputError("RunConfig: unsupported format version");
  RunConfig c;
  c.mode = diffusion_mode_from_string(j.at("mode").get<std::string>());
  c.cond = conditioning_mode_from_string(j.at("cond").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_points = j.at("n_points").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.train_steps = j.at("train_steps").get<long long>();
  c.checkpoint_every = j.value("checkpoint_every", 0LL);
  c.mask_ratio = j.value("mask_ratio", 0.0);
  c.overfit_fixed = j.value("overfit_fixed", false);
  c.tau = j.value("tau", 0.01);
  c.oracle_k = j.value("oracle_k", 1);
  c.dataset_dir = j.value("dataset_dir", std::string());
  c.out_dir = j.value("out_dir", std::string());
  const auto& s = j.at("schedule");
  c.T = s.at("T").get<int>();
  c.beta_start = s.at("beta_start").get<double>();
  c.beta_end = s.at("beta_end").get<double>();
  c.sigma_mode = sigma_mode_from_string(s.value("sigma_mode", "beta"));
  c.arch = ArchitectureConfig::from_json(j.at("arch"));
  c.optimizer = OptimizerConfig::from_json(j.at("optimizer"));
  c.dataset_gen = DatasetGenConfig::from_json(j.at("dataset_gen"));
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("RunConfig::load: cannot open " + path.string());
  return from_json(nlohmann::json::parse(in));
}

void RunConfig::validate() const {
  if (n_points < 1) throw InvalidInputError("RunConfig: n_points must be >= 1");
  if (batch_size < 1) throw InvalidInputError("RunConfig: batch_size must be >= 1");
  if (train_steps < 0) throw InvalidInputError("RunConfig: train_steps must be >= 0");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
    throw InvalidInputError("RunConfig: mask_ratio out of [0, 1]");
  if (!(tau > 0.0)) throw InvalidInputError("RunConfig: tau must be positive");
  if (oracle_k < 1) throw InvalidInputError("RunConfig: oracle_k must be >= 1");
  if (T < 1) throw InvalidInputError("RunConfig: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw InvalidInputError("RunConfig: need 0 < beta_start <= beta_end < 1");
  dataset_gen.validate();
  // Constructing the schedule and a probe net surfaces any remaining
  // range errors before work starts.
  (void)linear_schedule(T, beta_start, beta_end, sigma_mode);
}

RunConfig paper_run_config() {
  RunConfig c;
  c.n_points = 8192;
  c.batch_size = 16;
  c.train_steps = 100000;
  c.T = 1000;
  c.tau = 0.01;
  c.optimizer.base_lr = 1e-5;
  c.optimizer.peak_lr = 1e-3;
  c.optimizer.warmup_steps = 2000;
  c.optimizer.total_steps = 100000;
  c.dataset_gen.n_points = 8192;
  return c;
}

RunConfig desk_run_config() {
  RunConfig c;
  c.n_points = 256;
  c.batch_size = 16;
  c.train_steps = 8000;
  c.T = 100;
  c.tau = 0.05;
  c.optimizer.base_lr = 1e-5;
  c.optimizer.peak_lr = 1e-3;
  c.optimizer.warmup_steps = 400;
  c.optimizer.total_steps = 8000;
  c.arch.hidden_width = 32;
  c.arch.blocks = {BlockKind::kPointwise, BlockKind::kGlobalContext,
                   BlockKind::kPointwise, BlockKind::kGlobalContext};
  c.dataset_gen.m_items = 350;
  c.dataset_gen.n_points = 256;
  c.dataset_gen.seed = 7;
  return c;
}

}  // namespace cdpm
