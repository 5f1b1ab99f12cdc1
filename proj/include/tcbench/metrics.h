#ifndef TCBENCH_METRICS_H_
#define TCBENCH_METRICS_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tcbench/heatmap.h"

namespace tcbench::metrics {

inline constexpr double kDefaultPsnrCap = 100.0;

// 10 log10(1 / mse) with peak 1; identical inputs give `cap`.
double Psnr(const Heatmap& pred, const Heatmap& truth,
            double cap = kDefaultPsnrCap);

struct GridPoint {
  double row = 0.0;
  double col = 0.0;
};

struct Flow {
  double d_row = 0.0;
  double d_col = 0.0;
  bool valid = false;
};

inline constexpr double kLkMinEigenvalue = 1e-6;

// Single-iteration Lucas-Kanade at `point` over a (2r+1)^2 window. Spatial
// gradients are central differences of `a` (one-sided at the grid edge);
// the temporal term is b - a. Invalid when the structure tensor's smaller
// eigenvalue is below kLkMinEigenvalue.
// Throws std::invalid_argument when the window leaves the grid.
Flow LkFlow(const Heatmap& a, const Heatmap& b, GridPoint point,
            int window_radius);

struct PointTrack {
  GridPoint start;
  std::vector<GridPoint> positions;  // one per frame
  std::vector<bool> valid;           // one per frame
};

// Seeds points on a lattice (`spacing` apart, `window_radius` from the
// border) and propagates each frame to frame with LkFlow at its rounded
// position. Once invalid, a track stays invalid.
std::vector<PointTrack> TrackGrid(const FrameSequence& seq, int spacing,
                                  int window_radius);

inline constexpr int kHistogramBins = 8;
inline constexpr double kMaxMagnitudeBins = 4.0;  // bins per frame

// Velocity magnitude, velocity angle, acceleration magnitude and
// acceleration angle histograms (8 bins each), each normalized to sum 1
// when it has samples.
struct MotionFeature {
  std::vector<double> values;  // 4 * kHistogramBins
};

// One feature per window of `window_len` frames, advancing by `stride`.
// Only steps whose endpoints are all valid contribute; windows with no
// samples are dropped. Throws when window_len < 3.
std::vector<MotionFeature> ComputeMotionFeatures(
    const std::vector<PointTrack>& tracks, int window_len, int stride);

// Frechet distance between N(mu1, cov1) and N(mu2, cov2). Matrix square
// roots use symmetric eigendecompositions with negative eigenvalues clamped.
double GaussianFrechet(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                       const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2);

struct FvmdConfig {
  int spacing = 4;
  int window_radius = 2;
  int window_len = 8;
  int stride = 4;
};

inline constexpr double kCovarianceRegularizer = 1e-6;

// Motion features of each sliding window of a sequence. Tracks are seeded
// afresh at the start of every window.
std::vector<MotionFeature> SequenceMotionFeatures(const FrameSequence& seq,
                                                  const FvmdConfig& cfg);

// Frechet distance between Gaussian fits of the two sequences' motion
// features. Throws std::invalid_argument with fewer than window_len + 2
// frames or fewer than two feature windows on either side.
double Fvmd(const FrameSequence& pred, const FrameSequence& ref,
            const FvmdConfig& cfg = {});

// Mean Euclidean distance between consecutive-frame correlation peaks of the
// two sequences (integer bins).
double PeakDistanceMetric(const FrameSequence& pred, const FrameSequence& ref);

// Absolute positional error summary; std is the population standard
// deviation.
struct ApeReport {
  double rmse = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

ApeReport Ape(const Trajectory& est, const Trajectory& gt);

struct CellIndex {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  bool operator==(const CellIndex&) const = default;
  auto operator<=>(const CellIndex&) const = default;
};

// Occupied cells in global integer coordinates: cell (ix, iy) covers
// [ix * resolution, (ix + 1) * resolution) along x, likewise for y.
struct OccupancyGrid {
  double resolution = 0.1;
  std::vector<CellIndex> cells;  // sorted, unique

  bool empty() const { return cells.empty(); }
  // World coordinates of the lower corner of the occupied bounding box.
  Point2 origin() const;
};

// Union over frames of PolarToCart(frame, pose, threshold), rasterized.
// Poses are taken from `traj`, which must share the sequence's timestamps.
OccupancyGrid RasterizeMap(const FrameSequence& seq, const Trajectory& traj,
                           double resolution, double threshold);

// Aligns b to a by the integer shift maximizing binary cross-correlation
// (ties: smallest shift), then returns |a & b| / |a | b|. Shifts are searched
// up to half the larger map extent per axis. Both empty gives 1.
double MapIou(const OccupancyGrid& a, const OccupancyGrid& b);

}  // namespace tcbench::metrics

#endif  // TCBENCH_METRICS_H_
