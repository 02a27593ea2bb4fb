#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cdpm/conditioning.hpp"
#include "cdpm/denoiser.hpp"
#include "cdpm/geometry.hpp"
#include "cdpm/rng.hpp"
#include "cdpm/schedule.hpp"

namespace cdpm {

// DDPM samples in the full space; CDPM projects every noise tensor and
// every sampled cloud onto the zero-centroid subspace, pinning the
// cloud's gravity center to the origin through the whole chain.
enum class DiffusionMode { kDdpm, kCdpm };

DiffusionMode diffusion_mode_from_string(const std::string& s);
std::string to_string(DiffusionMode m);

struct DiffusionState {
  int t = 0;
  PointCloud cloud;
  DiffusionMode mode = DiffusionMode::kDdpm;
  RandomStream rng{0, 0};
};

// n i.i.d. standard-normal 3-vectors; deterministic given the stream.
PointCloud sample_noise(std::size_t n, RandomStream& rng);

// Closed-form jump to step t: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
// t = 0 returns x0 (abar_0 = 1).
PointCloud forward_sample(const NoiseSchedule& sched, const PointCloud& x0, int t,
                          const PointCloud& noise);

// Single transition: sqrt(1 - beta_t) x_prev + sqrt(beta_t) noise.
PointCloud forward_step(const NoiseSchedule& sched, const PointCloud& x_prev, int t,
                        const PointCloud& noise);

// Projection onto the zero-centroid subspace; applied to clouds, sampled
// noise and predicted noise alike.
inline PointCloud center_projection(const PointCloud& x) { return centralize(x); }

// One reverse transition from state.t to state.t - 1 using the noise
// prediction eps_pred and the sampling noise (ignored at t = 1: the
// final step is deterministic). In CDPM mode eps_pred and the resulting
// cloud are center-projected.
DiffusionState reverse_step(const NoiseSchedule& sched, const DiffusionState& state,
                            const PointCloud& eps_pred, const PointCloud& noise);

// Noise prediction interface for sampling. cond is N x cond_width.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual PointCloud predict(const PointCloud& x, const Eigen::MatrixXd& cond,
                             int t) const = 0;
  virtual int cond_width() const = 0;
};

// Predicts zero noise; the closed-form stand-in for an untrained net.
class ZeroPredictor : public NoisePredictor {
 public:
  PointCloud predict(const PointCloud& x, const Eigen::MatrixXd&, int) const override {
    return PointCloud(x.size());
  }
  int cond_width() const override { return 0; }
};

class DenoiserPredictor : public NoisePredictor {
 public:
  DenoiserPredictor(const Denoiser& net, int T) : net_(net), T_(T) {}
  PointCloud predict(const PointCloud& x, const Eigen::MatrixXd& cond,
                     int t) const override {
    return net_.predict_noise(x, cond, t, T_);
  }
  int cond_width() const override { return net_.config().cond_width; }

 private:
  const Denoiser& net_;
  int T_;
};

struct TraceRow {
  int t;
  Vec3 centroid;
  Vec2 pixel;  // projected centroid; NaN without a camera or behind it
};

struct ChainOptions {
  bool record_trace = true;
  // Test knob: disabling reproduces DDPM bit-exactly from CDPM mode.
  bool apply_centering = true;
};

struct ChainResult {
  PointCloud cloud;                // x^0
  std::vector<TraceRow> trace;     // T+1 rows, t = T down to 0
};

// Full reverse chain from x^T ~ N(0, I) down to x^0. ctx supplies the
// per-step condition vectors (nullptr: zero conditioning, trace pixels
// NaN). Deterministic per seed.
ChainResult sample_chain(const NoiseSchedule& sched, const NoisePredictor& predictor,
                         const ConditioningContext* ctx, std::size_t n,
                         DiffusionMode mode, std::uint64_t seed,
                         const ChainOptions& opts = {});

// Columns t, cx, cy, cz, px, py.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

struct TrainingItem {
  const PointCloud* x0 = nullptr;
  const ConditioningContext* ctx = nullptr;  // nullptr: zero conditioning
};

struct TrainingOptions {
  DiffusionMode mode = DiffusionMode::kCdpm;
  // > 0 enables occlusion augmentation: each sample masks a fresh ratio
  // drawn uniformly from [0, mask_max].
  double mask_max = 0.0;
  // Fixed-tuple overfit: draw (t, noise) once from the seed and reuse
  // them every step, turning training into deterministic regression.
  bool fixed_tuple = false;
};

struct TrainingStats {
  // Largest ||centroid||_inf seen among the diffused inputs x^t; in CDPM
  // mode this is the per-step zero-mean assertion.
  double max_center_violation = 0.0;
};

// One stochastic gradient step's worth of loss and gradients (the
// parameter update itself is AdamW::step). t is drawn per batch element.
// Gradients are reduced in element order, so results do not depend on
// thread count. Throws DivergedTrainingError on non-finite loss.
double training_step(const NoiseSchedule& sched, Denoiser& net,
                     const std::vector<TrainingItem>& batch,
                     const TrainingOptions& opts, std::uint64_t seed,
                     std::uint64_t step, TrainingStats* stats = nullptr);

}  // namespace cdpm
