#pragma once

// Shared test-only helpers: independent brute-force oracles and input
// generators. These must stay independent of the accelerated library
// paths they are used to check.

#include <cmath>
#include <limits>
#include <utility>

#include "cdpm/geometry.hpp"
#include "cdpm/rng.hpp"

namespace cdpm::test {

inline PointCloud random_cloud(std::size_t n, RandomStream& rng, double scale = 1.0) {
  PointCloud pc(n);
  for (std::size_t i = 0; i < n; ++i)
    pc[i] = scale * Vec3(rng.normal(), rng.normal(), rng.normal());
  return pc;
}

// O(N^2) nearest neighbor.
inline std::pair<std::size_t, double> brute_nearest(const PointCloud& pts, const Vec3& q) {
  std::size_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - q).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = i;
    }
  }
  return {best, best_sq};
}

inline double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  double sum_ab = 0.0, sum_ba = 0.0;
  for (const Vec3& p : a) sum_ab += brute_nearest(b, p).second;
  for (const Vec3& p : b) sum_ba += brute_nearest(a, p).second;
  return sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size());
}

struct BruteScore {
  double precision, recall, fscore;
};

inline BruteScore brute_fscore(const PointCloud& pred, const PointCloud& gt, double tau) {
  const double tau_sq = tau * tau;
  std::size_t pred_ok = 0, gt_ok = 0;
  for (const Vec3& p : pred)
    if (brute_nearest(gt, p).second < tau_sq) ++pred_ok;
  for (const Vec3& p : gt)
    if (brute_nearest(pred, p).second < tau_sq) ++gt_ok;
  BruteScore s;
  s.precision = static_cast<double>(pred_ok) / static_cast<double>(pred.size());
  s.recall = static_cast<double>(gt_ok) / static_cast<double>(gt.size());
  s.fscore = (s.precision + s.recall > 0.0)
                 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                 : 0.0;
  return s;
}

// Guarded relative error with an absolute floor of 1, for comparing
// finite-difference and analytic gradients of O(1) losses.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace cdpm::test
