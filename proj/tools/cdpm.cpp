#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdpm/commands.hpp"
#include "cdpm/errors.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoull(tok));
  return out;
}

struct CommonFlags {
  std::string config_path;
  std::string mode, cond;
  std::string dataset, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double mask_ratio = -1.0;
  double tau = 0.0;
  int oracle_k = 0;
  long long steps = -1;
  bool overfit_fixed = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run-config JSON file (default: desk profile)");
    cmd->add_option("--seed", seed, "Random seed")->each([this](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--mode", mode, "Diffusion mode: ddpm or cdpm");
    cmd->add_option("--cond", cond, "Conditioning: L, G or GL");
    cmd->add_option("--dataset", dataset, "Dataset directory");
    cmd->add_option("--out", out, "Output directory (or report path for eval)");
    cmd->add_option("--mask-ratio", mask_ratio,
                    "Occlusion ratio: augmentation cap when training, fixed share "
                    "when sampling/evaluating");
    cmd->add_option("--tau", tau, "F-Score distance threshold");
    cmd->add_option("--oracle-k", oracle_k, "Samples per item for best-of-k");
    cmd->add_option("--steps", steps, "Training steps override");
    cmd->add_flag("--overfit-fixed", overfit_fixed,
                  "Train a fixed (x0, cond, t, noise) tuple on item 0");
  }

  cdpm::RunConfig build() const {
    cdpm::RunConfig cfg = config_path.empty() ? cdpm::desk_run_config()
                                              : cdpm::RunConfig::load(config_path);
    if (seed_set) {
      cfg.seed = seed;
      cfg.dataset_gen.seed = seed;
    }
    if (!mode.empty()) cfg.mode = cdpm::diffusion_mode_from_string(mode);
    if (!cond.empty()) cfg.cond = cdpm::conditioning_mode_from_string(cond);
    if (!dataset.empty()) cfg.dataset_dir = dataset;
    if (!out.empty()) cfg.out_dir = out;
    if (mask_ratio >= 0.0) cfg.mask_ratio = mask_ratio;
    if (tau > 0.0) cfg.tau = tau;
    if (oracle_k > 0) cfg.oracle_k = oracle_k;
    if (steps >= 0) cfg.train_steps = steps;
    if (overfit_fixed) cfg.overfit_fixed = true;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  cdpm::apply_thread_cap();

  CLI::App app{"Centered denoising diffusion for point-cloud reconstruction"};
  app.require_subcommand(1);

  CommonFlags generate_flags, train_flags, sample_flags, eval_flags, compare_flags;
  std::string checkpoint, items_str, pred_dir, config_b_path, seeds_str;

  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  generate_flags.attach(generate);

  CLI::App* train = app.add_subcommand("train", "Train a denoiser");
  train_flags.attach(train);

  CLI::App* sample = app.add_subcommand("sample", "Sample reconstructions from a checkpoint");
  sample_flags.attach(sample);
  sample->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  sample->add_option("--items", items_str, "Comma-separated item indices (default: test split)");

  CLI::App* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_flags.attach(eval);
  eval->add_option("--pred", pred_dir, "Directory holding {item}_{s}.ply predictions")
      ->required();

  CLI::App* compare = app.add_subcommand(
      "compare", "Seed-paired A/B trial of two configs differing only in mode");
  compare_flags.attach(compare);
  compare->add_option("--config-b", config_b_path,
                      "Second config (default: first config with the mode flipped)");
  compare->add_option("--seeds", seeds_str, "Comma-separated seed list")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) {
      cdpm::RunConfig cfg = generate_flags.build();
      if (cfg.dataset_dir.empty()) cfg.dataset_dir = cfg.out_dir;
      cdpm::cmd_generate(cfg);
      std::cout << "dataset written to " << cfg.dataset_dir << "\n";
    } else if (train->parsed()) {
      const cdpm::RunConfig cfg = train_flags.build();
      const cdpm::TrainOutcome outcome = cdpm::cmd_train(cfg);
      std::cout << "final loss " << outcome.final_loss << ", centering violations "
                << outcome.centering_violations << ", checkpoint "
                << outcome.checkpoint.string() << "\n";
    } else if (sample->parsed()) {
      const cdpm::RunConfig cfg = sample_flags.build();
      cdpm::cmd_sample(cfg, checkpoint,
                       items_str.empty() ? std::vector<int>{} : parse_int_list(items_str));
      std::cout << "samples written to " << cfg.out_dir << "\n";
    } else if (eval->parsed()) {
      cdpm::RunConfig cfg = eval_flags.build();
      std::string report_path = cfg.out_dir;
      if (report_path.empty()) report_path = "report.json";
      cfg.out_dir.clear();
      cdpm::cmd_eval(cfg, pred_dir, report_path);
      std::cout << "report written to " << report_path << "\n";
    } else if (compare->parsed()) {
      const cdpm::RunConfig cfg_a = compare_flags.build();
      cdpm::RunConfig cfg_b;
      if (!config_b_path.empty()) {
        cfg_b = cdpm::RunConfig::load(config_b_path);
      } else {
        cfg_b = cfg_a;
        cfg_b.mode = cfg_a.mode == cdpm::DiffusionMode::kCdpm ? cdpm::DiffusionMode::kDdpm
                                                              : cdpm::DiffusionMode::kCdpm;
      }
      const auto report =
          cdpm::cmd_compare(cfg_a, cfg_b, parse_seed_list(seeds_str), cfg_a.out_dir);
      std::cout << report.at("summary").dump(2) << "\n";
    }
  } catch (const cdpm::DivergedTrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
