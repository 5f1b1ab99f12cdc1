#include "tcbench/correlation.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace tcbench::correlation {
namespace {

int NextFastSize(int n) {
  // Smallest 2^a * 3^b * 5^c >= n.
  for (int m = n;; ++m) {
    int k = m;
    for (int p : {2, 3, 5}) {
      while (k % p == 0) k /= p;
    }
    if (k == 1) return m;
  }
}

// Plans are created once per padded shape and executed with the new-array
// interface, which is safe to call concurrently. FFTW_UNALIGNED lets them run
// on std::vector storage.
struct FftPlans {
  int rows = 0;
  int cols = 0;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

struct FftwBuffer {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwBuffer>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwBuffer>;

RealBuffer AllocReal(std::size_t n) {
  return RealBuffer(fftw_alloc_real(n));
}
ComplexBuffer AllocComplex(std::size_t n) {
  return ComplexBuffer(fftw_alloc_complex(n));
}

const FftPlans& PlansFor(int rows, int cols) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({rows, cols});
  if (it != cache.end()) return it->second;
  const std::size_t n_real = static_cast<std::size_t>(rows) * cols;
  const std::size_t n_complex = static_cast<std::size_t>(rows) * (cols / 2 + 1);
  RealBuffer real = AllocReal(n_real);
  ComplexBuffer spec = AllocComplex(n_complex);
  FftPlans plans;
  plans.rows = rows;
  plans.cols = cols;
  plans.forward = fftw_plan_dft_r2c_2d(rows, cols, real.get(), spec.get(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.inverse = fftw_plan_dft_c2r_2d(rows, cols, spec.get(), real.get(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(std::make_pair(rows, cols), plans).first->second;
}

CorrMap XcorrDirect(std::span<const double> a, std::span<const double> b,
                    int rows, int cols) {
  CorrMap out{Grid2D(2 * rows - 1, 2 * cols - 1)};
  for (int dy = -(rows - 1); dy <= rows - 1; ++dy) {
    const int i0 = std::max(0, dy);
    const int i1 = std::min(rows, rows + dy);
    for (int dx = -(cols - 1); dx <= cols - 1; ++dx) {
      const int j0 = std::max(0, dx);
      const int j1 = std::min(cols, cols + dx);
      double sum = 0.0;
      for (int i = i0; i < i1; ++i) {
        const double* ra = a.data() + static_cast<std::size_t>(i) * cols;
        const double* rb = b.data() + static_cast<std::size_t>(i - dy) * cols;
        for (int j = j0; j < j1; ++j) sum += ra[j] * rb[j - dx];
      }
      out.grid.at(rows - 1 + dy, cols - 1 + dx) = sum;
    }
  }
  return out;
}

}  // namespace

XcorrSpectrum ComputeSpectrum(std::span<const double> a, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || a.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("spectrum input does not match its shape");
  }
  XcorrSpectrum s;
  s.rows = rows;
  s.cols = cols;
  s.padded_rows = NextFastSize(2 * rows - 1);
  s.padded_cols = NextFastSize(2 * cols - 1);
  const FftPlans& plans = PlansFor(s.padded_rows, s.padded_cols);
  std::vector<double> buf(static_cast<std::size_t>(s.padded_rows) * s.padded_cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    std::copy_n(a.data() + static_cast<std::size_t>(i) * cols, cols,
                buf.data() + static_cast<std::size_t>(i) * s.padded_cols);
  }
  s.values.resize(static_cast<std::size_t>(s.padded_rows) * (s.padded_cols / 2 + 1));
  fftw_execute_dft_r2c(plans.forward, buf.data(),
                       reinterpret_cast<fftw_complex*>(s.values.data()));
  return s;
}

CorrMap Xcorr2(const XcorrSpectrum& a, const XcorrSpectrum& b) {
  if (a.rows != b.rows || a.cols != b.cols || a.values.size() != b.values.size()) {
    throw std::invalid_argument("xcorr2 spectra must share one shape");
  }
  const int rows = a.rows;
  const int cols = a.cols;
  const int pr = a.padded_rows;
  const int pc = a.padded_cols;
  const FftPlans& plans = PlansFor(pr, pc);
  // A * conj(B) gives sum_i a[i] b[i - d] at circular index d.
  std::vector<std::complex<double>> prod(a.values.size());
  for (std::size_t k = 0; k < prod.size(); ++k) {
    prod[k] = a.values[k] * std::conj(b.values[k]);
  }
  std::vector<double> buf(static_cast<std::size_t>(pr) * pc);
  fftw_execute_dft_c2r(plans.inverse, reinterpret_cast<fftw_complex*>(prod.data()),
                       buf.data());

  const double scale = 1.0 / static_cast<double>(buf.size());
  CorrMap out{Grid2D(2 * rows - 1, 2 * cols - 1)};
  for (int dy = -(rows - 1); dy <= rows - 1; ++dy) {
    const int src_r = dy >= 0 ? dy : pr + dy;
    for (int dx = -(cols - 1); dx <= cols - 1; ++dx) {
      const int src_c = dx >= 0 ? dx : pc + dx;
      out.grid.at(rows - 1 + dy, cols - 1 + dx) =
          buf[static_cast<std::size_t>(src_r) * pc + src_c] * scale;
    }
  }
  return out;
}

namespace {

// Index offset of the parabola vertex through (-1, lo), (0, mid), (1, hi).
double ParabolicOffset(double lo, double mid, double hi) {
  const double denom = lo - 2.0 * mid + hi;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (lo - hi) / denom, -0.5, 0.5);
}

}  // namespace

CorrMap Xcorr2(std::span<const double> a, std::span<const double> b, int rows,
               int cols, XcorrMethod method) {
  if (rows <= 0 || cols <= 0 ||
      a.size() != static_cast<std::size_t>(rows) * cols ||
      b.size() != a.size()) {
    throw std::invalid_argument("xcorr2 inputs must share one shape");
  }
  if (method == XcorrMethod::kDirect) return XcorrDirect(a, b, rows, cols);
  return Xcorr2(ComputeSpectrum(a, rows, cols), ComputeSpectrum(b, rows, cols));
}

CorrMap Xcorr2(const Heatmap& a, const Heatmap& b, XcorrMethod method) {
  RequireSameGeometry(a, b);
  const std::vector<double> va = a.ToDouble();
  const std::vector<double> vb = b.ToDouble();
  return Xcorr2(va, vb, a.rows(), a.cols(), method);
}

ProbMap SepSoftmax(const CorrMap& c, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  const int rows = c.grid.rows;
  const int cols = c.grid.cols;
  const std::vector<double>& v = c.grid.values;
  const double gmax = *std::max_element(v.begin(), v.end());

  // One exponential per cell: both softmaxes share exp((c - max) / T) up to
  // per-column and per-row constants.
  std::vector<double> e(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) e[k] = std::exp((v[k] - gmax) / temperature);
  std::vector<double> col_sum(static_cast<std::size_t>(cols), 0.0);
  std::vector<double> row_sum(static_cast<std::size_t>(rows), 0.0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double x = e[static_cast<std::size_t>(i) * cols + j];
      col_sum[static_cast<std::size_t>(j)] += x;
      row_sum[static_cast<std::size_t>(i)] += x;
    }
  }
  const bool underflow =
      std::any_of(col_sum.begin(), col_sum.end(), [](double x) { return !(x > 1e-250); }) ||
      std::any_of(row_sum.begin(), row_sum.end(), [](double x) { return !(x > 1e-250); });

  ProbMap out{Grid2D(rows, cols)};
  if (!underflow) {
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * cols + j;
        out.grid.values[k] = (e[k] / col_sum[static_cast<std::size_t>(j)]) *
                             (e[k] / row_sum[static_cast<std::size_t>(i)]);
      }
    }
  } else {
    // Some row or column sits far below the global maximum; shift each axis
    // by its own maximum instead.
    Grid2D along_height(rows, cols);
    Grid2D along_width(rows, cols);
    for (int j = 0; j < cols; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows; ++i) mx = std::max(mx, c.grid.at(i, j));
      double sum = 0.0;
      for (int i = 0; i < rows; ++i) {
        along_height.at(i, j) = std::exp((c.grid.at(i, j) - mx) / temperature);
        sum += along_height.at(i, j);
      }
      for (int i = 0; i < rows; ++i) along_height.at(i, j) /= sum;
    }
    for (int i = 0; i < rows; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < cols; ++j) mx = std::max(mx, c.grid.at(i, j));
      double sum = 0.0;
      for (int j = 0; j < cols; ++j) {
        along_width.at(i, j) = std::exp((c.grid.at(i, j) - mx) / temperature);
        sum += along_width.at(i, j);
      }
      for (int j = 0; j < cols; ++j) along_width.at(i, j) /= sum;
    }
    for (std::size_t k = 0; k < out.grid.values.size(); ++k) {
      out.grid.values[k] = along_height.values[k] * along_width.values[k];
    }
  }
  double total = 0.0;
  for (double x : out.grid.values) total += x;
  for (double& x : out.grid.values) x /= total;
  return out;
}

double KlDiv(const ProbMap& p, const ProbMap& q) {
  if (p.grid.rows != q.grid.rows || p.grid.cols != q.grid.cols) {
    throw std::invalid_argument("kl_div inputs must share one shape");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < p.grid.values.size(); ++k) {
    const double pk = p.grid.values[k];
    if (pk <= 0.0) continue;
    sum += pk * std::log(pk / std::max(q.grid.values[k], kKlEpsilon));
  }
  return sum;
}

double TransformLoss(const Heatmap& p_t, const Heatmap& p_prev,
                     const Heatmap& l_t, const Heatmap& l_prev,
                     double temperature) {
  RequireSameGeometry(p_t, p_prev);
  RequireSameGeometry(p_t, l_t);
  RequireSameGeometry(p_t, l_prev);
  const ProbMap q_l = SepSoftmax(Xcorr2(l_t, l_prev), temperature);
  const ProbMap q_p = SepSoftmax(Xcorr2(p_t, p_prev), temperature);
  return KlDiv(q_l, q_p);
}

Displacement PeakDisplacement(const CorrMap& c, bool subpixel) {
  const Grid2D& g = c.grid;
  double mx = -std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (double v : g.values) {
    mx = std::max(mx, v);
    max_abs = std::max(max_abs, std::abs(v));
  }
  // Floating-point ties within a relative 1e-12 band count as exact ties so
  // that flat (blank-frame) maps resolve to zero motion.
  const double tie_band = 1e-12 * max_abs;
  const int cy = c.center_row();
  const int cx = c.center_col();
  int best_r = cy;
  int best_c = cx;
  bool found = false;
  auto better = [](int dy, int dx, int by, int bx) {
    const long m = static_cast<long>(dy) * dy + static_cast<long>(dx) * dx;
    const long bm = static_cast<long>(by) * by + static_cast<long>(bx) * bx;
    if (m != bm) return m < bm;
    if (dy != by) return dy < by;
    return dx < bx;
  };
  for (int r = 0; r < g.rows; ++r) {
    for (int col = 0; col < g.cols; ++col) {
      if (g.at(r, col) < mx - tie_band) continue;
      if (!found || better(r - cy, col - cx, best_r - cy, best_c - cx)) {
        best_r = r;
        best_c = col;
        found = true;
      }
    }
  }
  Displacement d{static_cast<double>(best_r - cy),
                 static_cast<double>(best_c - cx)};
  if (subpixel) {
    if (best_r > 0 && best_r < g.rows - 1) {
      d.d_range += ParabolicOffset(g.at(best_r - 1, best_c), g.at(best_r, best_c),
                                   g.at(best_r + 1, best_c));
    }
    if (best_c > 0 && best_c < g.cols - 1) {
      d.d_azimuth += ParabolicOffset(g.at(best_r, best_c - 1),
                                     g.at(best_r, best_c),
                                     g.at(best_r, best_c + 1));
    }
  }
  return d;
}

Pose2D DisplacementToMotion(const Displacement& d, const SensorGeometry& geom) {
  const double forward = -d.d_range * geom.range_resolution();
  const double turn = -d.d_azimuth * geom.azimuth_resolution_rad();
  // Chord rule, matching the simulator's motion model.
  return Pose2D(forward * std::cos(0.5 * turn), forward * std::sin(0.5 * turn),
                turn);
}

Trajectory ScanMatchSequence(const FrameSequence& seq,
                             const ScanMatchOptions& options) {
  if (seq.size() < 2) {
    throw std::invalid_argument("scan matching needs at least two frames");
  }
  const SensorGeometry& geom = seq.geometry();
  std::vector<Pose2D> motions(seq.size() - 1);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    const CorrMap c =
        Xcorr2(seq[t].heatmap, seq[t - 1].heatmap, options.method);
    motions[t - 1] =
        DisplacementToMotion(PeakDisplacement(c, options.subpixel), geom);
  }
  Trajectory out;
  Pose2D pose = seq[0].pose;
  out.Append(seq[0].timestamp, pose);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    pose = pose.Compose(motions[t - 1]);
    out.Append(seq[t].timestamp, pose);
  }
  return out;
}

}  // namespace tcbench::correlation
