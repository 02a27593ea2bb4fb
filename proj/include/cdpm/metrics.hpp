#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cdpm/diffusion.hpp"
#include "cdpm/geometry.hpp"

namespace cdpm {

// Uniform-grid spatial hash over a fixed cloud answering exact nearest
// neighbor queries by expanding shell search. Cell size defaults to
// max-extent / cbrt(N).
class PointGrid {
 public:
  explicit PointGrid(const PointCloud& points, double cell_size_hint = 0.0);

  // (index of nearest point, squared distance). Exact: the search stops
  // only once every unvisited cell is provably farther than the best hit.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;

 private:
  std::size_t cell_of(int ix, int iy, int iz) const;
  const PointCloud& points_;
  Vec3 origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<std::size_t> cell_start_;  // prefix offsets, size nx*ny*nz + 1
  std::vector<std::size_t> order_;       // point indices bucketed by cell
};

// Symmetric squared-distance Chamfer: mean_a min_b ||a-b||^2 +
// mean_b min_a ||b-a||^2. The "squared" convention is recorded in
// every report because reported values depend on it.
double chamfer(const PointCloud& a, const PointCloud& b);

struct MetricReport {
  double chamfer = 0.0;
  double fscore = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double tau = 0.0;
  std::string convention = "squared";
};

// Precision: fraction of pred within tau of gt; recall: fraction of gt
// within tau of pred; fscore: harmonic mean (0 when p + r = 0).
// Distances compared unsquared ("below the threshold" is strict).
MetricReport fscore(const PointCloud& pred, const PointCloud& gt, double tau);

struct OracleResult {
  std::size_t index = 0;
  MetricReport report;
};

// Best-of-k by F-Score@tau; ties resolved to the lowest index.
OracleResult oracle_best(const std::vector<PointCloud>& preds, const PointCloud& gt,
                         double tau);

struct DriftReport {
  std::vector<Vec3> centroids;            // T+1 entries
  std::vector<double> centroid_norms;     // L-inf, T+1 entries
  Vec3 terminal_centroid = Vec3::Zero();
  double terminal_centroid_norm = 0.0;
  std::vector<double> proj_displacements;  // pixel-space, T entries
};

// Centroid-norm series plus the pixel displacement of the projected
// centroid between consecutive steps (recomputed from the trace
// centroids with the given camera).
DriftReport drift_stats(const std::vector<TraceRow>& trace, const Camera& cam);

}  // namespace cdpm
