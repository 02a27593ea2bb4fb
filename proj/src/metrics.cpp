#include "cdpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdpm/errors.hpp"

namespace cdpm {

PointGrid::PointGrid(const PointCloud& points, double cell_size_hint)
    : points_(points) {
  if (points.empty()) throw InvalidInputError("PointGrid: empty point cloud");

  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  const double extent = (hi - lo).maxCoeff();

  double cell = cell_size_hint;
  if (cell <= 0.0)
    cell = extent / std::max(1.0, std::cbrt(static_cast<double>(points.size())));
  // Keep the table bounded and never degenerate.
  cell = std::max(cell, extent / 64.0);
  cell_ = std::max(cell, 1e-12);

  nx_ = std::max(1, static_cast<int>(std::floor((hi.x() - lo.x()) / cell_)) + 1);
  ny_ = std::max(1, static_cast<int>(std::floor((hi.y() - lo.y()) / cell_)) + 1);
  nz_ = std::max(1, static_cast<int>(std::floor((hi.z() - lo.z()) / cell_)) + 1);

  const std::size_t n_cells = static_cast<std::size_t>(nx_) * ny_ * nz_;
  std::vector<std::size_t> counts(n_cells, 0);
  std::vector<std::size_t> cell_idx(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 rel = (points[i] - origin_) / cell_;
    const int ix = std::min(nx_ - 1, static_cast<int>(rel.x()));
    const int iy = std::min(ny_ - 1, static_cast<int>(rel.y()));
    const int iz = std::min(nz_ - 1, static_cast<int>(rel.z()));
    cell_idx[i] = cell_of(ix, iy, iz);
    ++counts[cell_idx[i]];
  }
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
  order_.resize(points.size());
  std::vector<std::size_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) order_[cursor[cell_idx[i]]++] = i;
}

std::size_t PointGrid::cell_of(int ix, int iy, int iz) const {
  return (static_cast<std::size_t>(iz) * ny_ + iy) * nx_ + ix;
}

std::pair<std::size_t, double> PointGrid::nearest(const Vec3& q) const {
  const Vec3 rel = (q - origin_) / cell_;
  const int qx = static_cast<int>(std::floor(rel.x()));
  const int qy = static_cast<int>(std::floor(rel.y()));
  const int qz = static_cast<int>(std::floor(rel.z()));

  // Maximum shell that can still reach a grid cell from the query cell.
  const int r_max = std::max({qx, nx_ - 1 - qx, qy, ny_ - 1 - qy, qz, nz_ - 1 - qz,
                              0});

  std::size_t best_idx = 0;
  double best_sq = std::numeric_limits<double>::infinity();

  for (int r = 0; r <= r_max; ++r) {
    // Shells 0..r-1 are done; any unvisited point lies in a cell at
    // Chebyshev distance >= r, hence farther than (r-1)*cell.
    if (r >= 1) {
      const double safe = static_cast<double>(r - 1) * cell_;
      if (best_sq <= safe * safe) break;
    }
    const int x0 = std::max(0, qx - r), x1 = std::min(nx_ - 1, qx + r);
    const int y0 = std::max(0, qy - r), y1 = std::min(ny_ - 1, qy + r);
    const int z0 = std::max(0, qz - r), z1 = std::min(nz_ - 1, qz + r);
    for (int iz = z0; iz <= z1; ++iz)
      for (int iy = y0; iy <= y1; ++iy)
        for (int ix = x0; ix <= x1; ++ix) {
          // Shell surface only: skip interior cells already visited.
          if (std::max({std::abs(ix - qx), std::abs(iy - qy), std::abs(iz - qz)}) != r)
            continue;
          const std::size_t c = cell_of(ix, iy, iz);
          for (std::size_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            const std::size_t i = order_[k];
            const double d = (points_[i] - q).squaredNorm();
            if (d < best_sq) {
              best_sq = d;
              best_idx = i;
            }
          }
        }
  }
  return {best_idx, best_sq};
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw InvalidInputError("chamfer: empty point cloud");
  const PointGrid grid_b(b);
  const PointGrid grid_a(a);
  double sum_ab = 0.0, sum_ba = 0.0;
  for (const Vec3& p : a) sum_ab += grid_b.nearest(p).second;
  for (const Vec3& p : b) sum_ba += grid_a.nearest(p).second;
  return sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size());
}

MetricReport fscore(const PointCloud& pred, const PointCloud& gt, double tau) {
  if (pred.empty() || gt.empty()) throw InvalidInputError("fscore: empty point cloud");
  if (!(tau > 0.0)) throw InvalidInputError("fscore: tau must be positive");

  const double tau_sq = tau * tau;
  const PointGrid grid_gt(gt, tau);
  const PointGrid grid_pred(pred, tau);

  std::size_t pred_ok = 0, gt_ok = 0;
  double sum_pg = 0.0, sum_gp = 0.0;
  for (const Vec3& p : pred) {
    const double d = grid_gt.nearest(p).second;
    sum_pg += d;
    if (d < tau_sq) ++pred_ok;
  }
  for (const Vec3& p : gt) {
    const double d = grid_pred.nearest(p).second;
    sum_gp += d;
    if (d < tau_sq) ++gt_ok;
  }

  MetricReport r;
  r.tau = tau;
  r.chamfer = sum_pg / static_cast<double>(pred.size()) +
              sum_gp / static_cast<double>(gt.size());
  r.precision = static_cast<double>(pred_ok) / static_cast<double>(pred.size());
  r.recall = static_cast<double>(gt_ok) / static_cast<double>(gt.size());
  r.fscore = (r.precision + r.recall > 0.0)
                 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                 : 0.0;
  return r;
}

OracleResult oracle_best(const std::vector<PointCloud>& preds, const PointCloud& gt,
                         double tau) {
  if (preds.empty()) throw InvalidInputError("oracle_best: empty prediction list");
  OracleResult best;
  best.index = 0;
  best.report = fscore(preds[0], gt, tau);
  for (std::size_t k = 1; k < preds.size(); ++k) {
    const MetricReport r = fscore(preds[k], gt, tau);
    if (r.fscore > best.report.fscore) {
      best.index = k;
      best.report = r;
    }
  }
  return best;
}

DriftReport drift_stats(const std::vector<TraceRow>& trace, const Camera& cam) {
  if (trace.empty()) throw InvalidInputError("drift_stats: empty trace");
  DriftReport rep;
  rep.centroids.reserve(trace.size());
  rep.centroid_norms.reserve(trace.size());
  for (const TraceRow& row : trace) {
    rep.centroids.push_back(row.centroid);
    rep.centroid_norms.push_back(row.centroid.lpNorm<Eigen::Infinity>());
  }
  rep.terminal_centroid = trace.back().centroid;
  rep.terminal_centroid_norm = rep.centroid_norms.back();
  rep.proj_displacements.reserve(trace.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const Vec2 a = project_point(cam, trace[i].centroid);
    const Vec2 b = project_point(cam, trace[i + 1].centroid);
    rep.proj_displacements.push_back((b - a).norm());
  }
  return rep;
}

}  // namespace cdpm
