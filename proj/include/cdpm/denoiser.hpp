#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdpm/geometry.hpp"

namespace cdpm {

enum class BlockKind { kPointwise, kGlobalContext };

// Permutation-equivariant point network predicting per-point noise.
// Point-wise blocks are shared affine maps + smooth-ramp nonlinearity;
// global-context blocks concatenate each point's features with the
// cloud-wide max and mean before the affine map. The final layer is
// linear and zero-initialized, so an untrained net predicts exactly 0.
struct ArchitectureConfig {
  int cond_width = 5;
  int time_embed_freqs = 8;  // K sinusoid pairs -> 2K dims
  int hidden_width = 128;
  std::vector<BlockKind> blocks = {BlockKind::kPointwise, BlockKind::kPointwise,
                                   BlockKind::kGlobalContext, BlockKind::kPointwise,
                                   BlockKind::kGlobalContext, BlockKind::kPointwise};

  int input_width() const { return 3 + cond_width + 2 * time_embed_freqs; }

  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchitectureConfig&) const = default;
};

// Sinusoidal features of t/T at K geometric frequencies; every component
// lies in [-1, 1].
Eigen::RowVectorXd time_embedding(int t, int T, int freqs);

class Denoiser {
 public:
  struct Layer {
    BlockKind kind;         // output layer reuses kPointwise
    Eigen::MatrixXd w;      // in x out
    Eigen::MatrixXd b;      // 1 x out
    Eigen::MatrixXd gw;     // gradient accumulators, same shapes
    Eigen::MatrixXd gb;
  };

  struct ForwardCache {
    bool valid = false;
    std::vector<Eigen::MatrixXd> h;        // h[0] = assembled input, h[l+1] = block l output
    std::vector<Eigen::MatrixXd> preact;   // per block
    std::vector<Eigen::MatrixXd> concat;   // per global-context block (else empty)
    std::vector<std::vector<Eigen::Index>> argmax;  // per global-context block
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> gw;
    std::vector<Eigen::MatrixXd> gb;
    Eigen::MatrixXd input_grad;  // N x input_width
  };

  Denoiser(const ArchitectureConfig& cfg, std::uint64_t seed);

  const ArchitectureConfig& config() const { return cfg_; }
  std::size_t parameter_count() const;

  // x: N x 3 point coordinates, cond: N x cond_width, t in [1, T].
  // Fills *cache for a later backward() when cache is non-null.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond,
                          int t, int T, ForwardCache* cache = nullptr) const;

  PointCloud predict_noise(const PointCloud& x, const Eigen::MatrixXd& cond,
                           int t, int T) const;

  // Exact reverse-mode gradients of a scalar loss with output gradient
  // dY (N x 3). Max-pool subgradients route to the argmax element (ties
  // to the lowest point index). Throws InvalidStateError without a
  // cached forward pass.
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& dY) const;

  void zero_grads();
  void accumulate(const Gradients& g);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  ArchitectureConfig cfg_;
  std::vector<Layer> layers_;  // blocks, then the output layer
};

// Decoupled weight decay Adam with linear warmup followed by exponential
// decay toward 0; the decay floor is treated as 0.
struct OptimizerConfig {
  double base_lr = 1e-5;
  double peak_lr = 1e-3;
  long long warmup_steps = 2000;
  long long total_steps = 100000;
  double weight_decay = 1e-4;  // excluded from biases
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_floor = 1e-8;

  nlohmann::json to_json() const;
  static OptimizerConfig from_json(const nlohmann::json& j);
};

class AdamW {
 public:
  AdamW(const Denoiser& net, const OptimizerConfig& cfg);

  double learning_rate(long long step) const;
  long long step_count() const { return step_; }

  // Applies one update using the gradients accumulated in the net.
  // Throws DivergedTrainingError on non-finite gradients.
  void step(Denoiser& net);

 private:
  OptimizerConfig cfg_;
  long long step_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;   // per tensor (weights and biases interleaved)
};

// Checkpoint: magic "CDPM", u32 format version, length-prefixed JSON
// (architecture config + provenance), then per-tensor
// (u32 name length, name, u32 rank, u32 dims, f32 row-major data).
void write_checkpoint(const std::filesystem::path& path, const Denoiser& net,
                      const nlohmann::json& extra_meta = nlohmann::json::object());

struct CheckpointData {
  ArchitectureConfig arch;
  nlohmann::json meta;
  Denoiser net;
};
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace cdpm
