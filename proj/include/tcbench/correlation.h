#ifndef TCBENCH_CORRELATION_H_
#define TCBENCH_CORRELATION_H_

#include <complex>
#include <span>
#include <vector>

#include "tcbench/heatmap.h"

namespace tcbench::correlation {

// Dense row-major 2D array of doubles. Used for correlation surfaces and
// their probability forms.
struct Grid2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Grid2D() = default;
  Grid2D(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
};

// Full zero-padded cross-correlation surface of two H x W inputs.
// Shape (2H-1) x (2W-1); index (H-1, W-1) is zero displacement.
struct CorrMap {
  Grid2D grid;
  int center_row() const { return (grid.rows - 1) / 2; }
  int center_col() const { return (grid.cols - 1) / 2; }
  // Value at displacement (d_range, d_azimuth).
  double at_displacement(int dy, int dx) const {
    return grid.at(center_row() + dy, center_col() + dx);
  }
};

// Non-negative, sums to one, same shape as the source CorrMap.
struct ProbMap {
  Grid2D grid;
};

struct Displacement {
  double d_range = 0.0;
  double d_azimuth = 0.0;
};

enum class XcorrMethod { kDirect, kFft };

// C[center + (dy, dx)] = sum_{i,j} a[i, j] * b[i - dy, j - dx].
// Throws std::invalid_argument on geometry mismatch.
CorrMap Xcorr2(const Heatmap& a, const Heatmap& b,
               XcorrMethod method = XcorrMethod::kFft);

// Same as Xcorr2 on raw row-major arrays of equal shape.
CorrMap Xcorr2(std::span<const double> a, std::span<const double> b, int rows,
               int cols, XcorrMethod method = XcorrMethod::kFft);

// Zero-padded spectrum of one input. Correlating through spectra lets a
// frame that takes part in several pairs be transformed once.
struct XcorrSpectrum {
  int rows = 0;
  int cols = 0;
  int padded_rows = 0;
  int padded_cols = 0;
  std::vector<std::complex<double>> values;
};

XcorrSpectrum ComputeSpectrum(std::span<const double> a, int rows, int cols);

// FFT route of Xcorr2 on precomputed spectra.
CorrMap Xcorr2(const XcorrSpectrum& a, const XcorrSpectrum& b);

// Separable softmax: column-wise softmax times row-wise softmax of
// values / temperature, renormalized to sum 1.
ProbMap SepSoftmax(const CorrMap& c, double temperature = 1.0);

inline constexpr double kKlEpsilon = 1e-12;

// sum p * ln(p / max(q, eps)); cells with p == 0 contribute nothing. The
// floor only bites where q underflows, so KL(p, p) is exactly 0.
double KlDiv(const ProbMap& p, const ProbMap& q);

// KL(Q_l || Q_p) where Q = SepSoftmax(Xcorr2(current, previous)).
double TransformLoss(const Heatmap& p_t, const Heatmap& p_prev,
                     const Heatmap& l_t, const Heatmap& l_prev,
                     double temperature = 1.0);

// Argmax offset from the map center. Ties go to the smallest displacement
// magnitude, then smallest d_range, then smallest d_azimuth. With `subpixel`
// each axis is refined by a 3-point parabola unless the peak sits on an edge.
Displacement PeakDisplacement(const CorrMap& c, bool subpixel);

struct ScanMatchOptions {
  bool subpixel = true;
  XcorrMethod method = XcorrMethod::kFft;
};

// Integrates per-pair correlation displacements from the first frame's pose.
// A range shift of d bins is read as forward motion of -d * range
// resolution (returns approach as the sensor advances) and an azimuth shift
// of d bins as a heading change of -d * azimuth resolution (a left turn
// moves returns toward lower bearings).
Trajectory ScanMatchSequence(const FrameSequence& seq,
                             const ScanMatchOptions& options = {});

// Relative motion implied by one displacement under the mapping above.
Pose2D DisplacementToMotion(const Displacement& d, const SensorGeometry& geom);

}  // namespace tcbench::correlation

#endif  // TCBENCH_CORRELATION_H_
