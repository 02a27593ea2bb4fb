#include "cdpm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cdpm/errors.hpp"

namespace cdpm {

DiffusionMode diffusion_mode_from_string(const std::string& s) {
  if (s == "ddpm" || s == "DDPM") return DiffusionMode::kDdpm;
  if (s == "cdpm" || s == "CDPM") return DiffusionMode::kCdpm;
  throw InvalidInputError("unknown diffusion mode '" + s + "'");
}

std::string to_string(DiffusionMode m) {
  return m == DiffusionMode::kDdpm ? "ddpm" : "cdpm";
}

PointCloud sample_noise(std::size_t n, RandomStream& rng) {
  if (n < 1) throw InvalidInputError("sample_noise: n must be >= 1");
  PointCloud pc(n);
  for (std::size_t i = 0; i < n; ++i)
    pc[i] = Vec3(rng.normal(), rng.normal(), rng.normal());
  return pc;
}

namespace {

void check_same_size(const PointCloud& a, const PointCloud& b, const char* what) {
  if (a.size() != b.size())
    throw InvalidInputError(std::string(what) + ": point count mismatch");
}

}  // namespace

PointCloud forward_sample(const NoiseSchedule& sched, const PointCloud& x0, int t,
                          const PointCloud& noise) {
  if (t < 0 || t > sched.T)
    throw InvalidInputError("forward_sample: t out of [0, T]");
  check_same_size(x0, noise, "forward_sample");
  const double abar = sched.alpha_bar_at(t);
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  PointCloud out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
  return out;
}

PointCloud forward_step(const NoiseSchedule& sched, const PointCloud& x_prev, int t,
                        const PointCloud& noise) {
  if (t < 1 || t > sched.T)
    throw InvalidInputError("forward_step: t out of [1, T]");
  check_same_size(x_prev, noise, "forward_step");
  const double beta = sched.beta_at(t);
  const double a = std::sqrt(1.0 - beta);
  const double b = std::sqrt(beta);
  PointCloud out(x_prev.size());
  for (std::size_t i = 0; i < x_prev.size(); ++i) out[i] = a * x_prev[i] + b * noise[i];
  return out;
}

DiffusionState reverse_step(const NoiseSchedule& sched, const DiffusionState& state,
                            const PointCloud& eps_pred, const PointCloud& noise) {
  if (state.t < 1)
    throw InvalidStateError("reverse_step: chain already at t = 0");
  if (state.t > sched.T)
    throw InvalidStateError("reverse_step: state.t exceeds schedule length");
  check_same_size(state.cloud, eps_pred, "reverse_step");
  check_same_size(state.cloud, noise, "reverse_step");

  const int t = state.t;
  const bool center = state.mode == DiffusionMode::kCdpm;
  const PointCloud eps = center ? center_projection(eps_pred) : eps_pred;

  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
  const double eps_coef = sched.beta_at(t) / std::sqrt(1.0 - sched.alpha_bar_at(t));
  const double sigma = (t >= 2) ? sched.sigma_at(t) : 0.0;

  DiffusionState next = state;
  next.t = t - 1;
  for (std::size_t i = 0; i < state.cloud.size(); ++i) {
    const Vec3 mu = inv_sqrt_alpha * (state.cloud[i] - eps_coef * eps[i]);
    next.cloud[i] = mu + sigma * noise[i];
  }
  if (center) next.cloud = center_projection(next.cloud);
  return next;
}

namespace {

TraceRow make_trace_row(int t, const PointCloud& cloud, const Camera* cam) {
  TraceRow row;
  row.t = t;
  row.centroid = centroid(cloud);
  if (cam) {
    row.pixel = project_point(*cam, row.centroid);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.pixel = Vec2(nan, nan);
  }
  return row;
}

}  // namespace

ChainResult sample_chain(const NoiseSchedule& sched, const NoisePredictor& predictor,
                         const ConditioningContext* ctx, std::size_t n,
                         DiffusionMode mode, std::uint64_t seed,
                         const ChainOptions& opts) {
  const Camera* cam = ctx ? &ctx->camera : nullptr;
  const bool center = mode == DiffusionMode::kCdpm && opts.apply_centering;

  DiffusionState state;
  // The centering knob demotes CDPM to DDPM transition-for-transition;
  // both modes consume the random stream identically.
  state.mode = center ? DiffusionMode::kCdpm : DiffusionMode::kDdpm;
  state.t = sched.T;
  state.rng = RandomStream(seed, 0x434841494eull /* "CHAIN" */);
  state.cloud = sample_noise(n, state.rng);
  if (center) state.cloud = center_projection(state.cloud);

  ChainResult result;
  if (opts.record_trace) {
    result.trace.reserve(static_cast<std::size_t>(sched.T) + 1);
    result.trace.push_back(make_trace_row(state.t, state.cloud, cam));
  }

  const Eigen::MatrixXd zero_cond =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), predictor.cond_width());

  while (state.t >= 1) {
    const Eigen::MatrixXd cond =
        ctx ? build_condition(*ctx, state.cloud) : zero_cond;
    const PointCloud eps_pred = predictor.predict(state.cloud, cond, state.t);
    const PointCloud noise = (state.t >= 2) ? sample_noise(n, state.rng) : PointCloud(n);
    state = reverse_step(sched, state, eps_pred, noise);
    if (opts.record_trace)
      result.trace.push_back(make_trace_row(state.t, state.cloud, cam));
  }
  result.cloud = std::move(state.cloud);
  return result;
}

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_trace_csv: cannot open " + path.string());
  out << "t,cx,cy,cz,px,py\n";
  char buf[192];
  for (const TraceRow& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.t,
                  row.centroid.x(), row.centroid.y(), row.centroid.z(), row.pixel.x(),
                  row.pixel.y());
    out << buf;
  }
}

double training_step(const NoiseSchedule& sched, Denoiser& net,
                     const std::vector<TrainingItem>& batch,
                     const TrainingOptions& opts, std::uint64_t seed,
                     std::uint64_t step, TrainingStats* stats) {
  if (batch.empty()) throw InvalidInputError("training_step: empty batch");
  const std::size_t B = batch.size();
  const bool cdpm = opts.mode == DiffusionMode::kCdpm;

  std::vector<Denoiser::Gradients> grads(B);
  std::vector<double> losses(B, 0.0);
  std::vector<double> center_violations(B, 0.0);

  const auto run_element = [&](std::size_t i) {
    const TrainingItem& item = batch[i];
    const std::size_t n = item.x0->size();
    RandomStream rng(seed, derive_stream(0x545241494eull /* "TRAIN" */,
                                         opts.fixed_tuple ? 0 : step, i));

    const int t = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(sched.T)));
    PointCloud x0 = cdpm ? center_projection(*item.x0) : *item.x0;
    PointCloud eps = sample_noise(n, rng);
    if (cdpm) eps = center_projection(eps);
    const PointCloud x_t = forward_sample(sched, x0, t, eps);
    if (cdpm) center_violations[i] = centroid(x_t).lpNorm<Eigen::Infinity>();

    Eigen::MatrixXd cond;
    if (item.ctx) {
      if (opts.mask_max > 0.0) {
        const double ratio = rng.uniform() * opts.mask_max;
        ConditioningContext aug = *item.ctx;
        aug.fmap = apply_mask(item.ctx->fmap, ratio, rng.next_u64());
        cond = build_condition(aug, x_t);
      } else {
        cond = build_condition(*item.ctx, x_t);
      }
    } else {
      cond = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                   net.config().cond_width);
    }

    Eigen::MatrixXd xm(static_cast<Eigen::Index>(n), 3);
    Eigen::MatrixXd target(static_cast<Eigen::Index>(n), 3);
    for (std::size_t k = 0; k < n; ++k) {
      xm.row(static_cast<Eigen::Index>(k)) = x_t[k];
      target.row(static_cast<Eigen::Index>(k)) = eps[k];
    }

    Denoiser::ForwardCache cache;
    const Eigen::MatrixXd pred = net.forward(xm, cond, t, sched.T, &cache);
    const Eigen::MatrixXd diff = pred - target;
    const double denom = static_cast<double>(n) * 3.0;
    losses[i] = diff.squaredNorm() / denom;
    // d(batch loss)/d pred, batch loss = mean over elements.
    const Eigen::MatrixXd dY = diff * (2.0 / (denom * static_cast<double>(B)));
    grads[i] = net.backward(cache, dY);
  };

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(B); ++i)
    run_element(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < B; ++i) run_element(i);
#endif

  // Ordered reduction: identical results for any worker count.
  net.zero_grads();
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    net.accumulate(grads[i]);
    loss += losses[i];
  }
  loss /= static_cast<double>(B);
  if (stats)
    stats->max_center_violation =
        *std::max_element(center_violations.begin(), center_violations.end());
  if (!std::isfinite(loss))
    throw DivergedTrainingError("training_step: non-finite loss",
                                static_cast<long long>(step));
  return loss;
}

}  // namespace cdpm
