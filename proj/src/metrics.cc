#include "tcbench/metrics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tcbench/correlation.h"

namespace tcbench::metrics {
namespace {

constexpr double kTimestampTolerance = 1e-9;

double GradientRow(const Heatmap& h, int r, int c) {
  if (r == 0) return h.at(1, c) - h.at(0, c);
  if (r == h.rows() - 1) return h.at(r, c) - h.at(r - 1, c);
  return 0.5 * (h.at(r + 1, c) - h.at(r - 1, c));
}

double GradientCol(const Heatmap& h, int r, int c) {
  if (c == 0) return h.at(r, 1) - h.at(r, 0);
  if (c == h.cols() - 1) return h.at(r, c) - h.at(r, c - 1);
  return 0.5 * (h.at(r, c + 1) - h.at(r, c - 1));
}

bool InsideMargin(const Heatmap& h, int r, int c, int margin) {
  return r - margin >= 0 && r + margin <= h.rows() - 1 && c - margin >= 0 &&
         c + margin <= h.cols() - 1;
}

int MagnitudeBin(double m) {
  const double width = kMaxMagnitudeBins / kHistogramBins;
  return std::clamp(static_cast<int>(std::floor(m / width)), 0, kHistogramBins - 1);
}

// Bins are (-pi + k w, -pi + (k + 1) w].
int AngleBin(double angle) {
  const double width = 2.0 * kPi / kHistogramBins;
  const int k = static_cast<int>(std::ceil((angle + kPi) / width)) - 1;
  return std::clamp(k, 0, kHistogramBins - 1);
}

void Normalize(std::vector<double>& v, std::size_t offset) {
  double sum = 0.0;
  for (int i = 0; i < kHistogramBins; ++i) sum += v[offset + i];
  if (sum <= 0.0) return;
  for (int i = 0; i < kHistogramBins; ++i) v[offset + i] /= sum;
}

Eigen::MatrixXd SymmetricSqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  Eigen::VectorXd ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(std::max(0.0, ev(i)));
  return solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
}

void CheckCovariance(const Eigen::MatrixXd& cov, const char* name) {
  if (cov.rows() != cov.cols()) {
    throw std::invalid_argument(std::string(name) + " is not square");
  }
  if (!cov.allFinite()) {
    throw std::invalid_argument(std::string(name) + " has non-finite entries");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument(std::string(name) + " is not symmetric");
  }
}

void FitGaussian(const std::vector<MotionFeature>& feats, Eigen::VectorXd& mu,
                 Eigen::MatrixXd& cov) {
  const Eigen::Index n = static_cast<Eigen::Index>(feats.size());
  const Eigen::Index d = static_cast<Eigen::Index>(feats.front().values.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = feats[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];
    }
  }
  mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());
  cov += kCovarianceRegularizer * Eigen::MatrixXd::Identity(d, d);
}

void RequireAligned(const FrameSequence& seq, const Trajectory& traj) {
  if (seq.size() != traj.size()) {
    throw std::invalid_argument("sequence and trajectory lengths differ");
  }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (std::abs(seq[i].timestamp - traj[i].timestamp) > kTimestampTolerance) {
      throw std::invalid_argument("sequence and trajectory timestamps differ at frame " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

double Psnr(const Heatmap& pred, const Heatmap& truth, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("psnr cap must be positive");
  const double mse = HeatmapMse(pred, truth);
  if (mse <= 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

Flow LkFlow(const Heatmap& a, const Heatmap& b, GridPoint point, int window_radius) {
  RequireSameGeometry(a, b);
  if (window_radius < 1) throw std::invalid_argument("window_radius must be >= 1");
  const int pr = static_cast<int>(std::lround(point.row));
  const int pc = static_cast<int>(std::lround(point.col));
  if (!InsideMargin(a, pr, pc, window_radius)) {
    throw std::invalid_argument("LK window extends past the heatmap border");
  }
  double grr = 0.0, grc = 0.0, gcc = 0.0, br = 0.0, bc = 0.0;
  for (int r = pr - window_radius; r <= pr + window_radius; ++r) {
    for (int c = pc - window_radius; c <= pc + window_radius; ++c) {
      const double ir = GradientRow(a, r, c);
      const double ic = GradientCol(a, r, c);
      const double it = static_cast<double>(b.at(r, c)) - a.at(r, c);
      grr += ir * ir;
      grc += ir * ic;
      gcc += ic * ic;
      br -= ir * it;
      bc -= ic * it;
    }
  }
  const double trace = grr + gcc;
  const double det = grr * gcc - grc * grc;
  const double disc = std::sqrt(std::max(0.0, 0.25 * trace * trace - det));
  const double lambda_min = 0.5 * trace - disc;
  Flow f;
  if (!(lambda_min >= kLkMinEigenvalue)) return f;
  f.d_row = (gcc * br - grc * bc) / det;
  f.d_col = (grr * bc - grc * br) / det;
  f.valid = std::isfinite(f.d_row) && std::isfinite(f.d_col);
  return f;
}

std::vector<PointTrack> TrackGrid(const FrameSequence& seq, int spacing,
                                  int window_radius) {
  if (spacing < 1) throw std::invalid_argument("track spacing must be >= 1");
  if (window_radius < 1) throw std::invalid_argument("window_radius must be >= 1");
  std::vector<PointTrack> tracks;
  if (seq.empty()) return tracks;
  const int rows = seq.geometry().n_range_bins;
  const int cols = seq.geometry().n_azimuth_bins;
  for (int r = window_radius; r <= rows - 1 - window_radius; r += spacing) {
    for (int c = window_radius; c <= cols - 1 - window_radius; c += spacing) {
      PointTrack t;
      t.start = {static_cast<double>(r), static_cast<double>(c)};
      t.positions.assign(seq.size(), t.start);
      t.valid.assign(seq.size(), false);
      t.valid[0] = true;
      tracks.push_back(std::move(t));
    }
  }
  for (std::size_t f = 1; f < seq.size(); ++f) {
    const Heatmap& prev = seq[f - 1].heatmap;
    const Heatmap& cur = seq[f].heatmap;
    for (PointTrack& t : tracks) {
      t.positions[f] = t.positions[f - 1];
      if (!t.valid[f - 1]) continue;
      const GridPoint p = t.positions[f - 1];
      const int ir = static_cast<int>(std::lround(p.row));
      const int ic = static_cast<int>(std::lround(p.col));
      if (!InsideMargin(prev, ir, ic, window_radius)) continue;
      const Flow flow = LkFlow(prev, cur, p, window_radius);
      if (!flow.valid) continue;
      const GridPoint next{p.row + flow.d_row, p.col + flow.d_col};
      if (next.row < 0.0 || next.row > rows - 1 || next.col < 0.0 ||
          next.col > cols - 1) {
        continue;
      }
      t.positions[f] = next;
      t.valid[f] = true;
    }
  }
  return tracks;
}

std::vector<MotionFeature> ComputeMotionFeatures(const std::vector<PointTrack>& tracks,
                                                 int window_len, int stride) {
  if (window_len < 3) throw std::invalid_argument("window_len must be at least 3");
  if (stride < 1) throw std::invalid_argument("stride must be at least 1");
  std::vector<MotionFeature> out;
  if (tracks.empty()) return out;
  const int frames = static_cast<int>(tracks.front().positions.size());
  constexpr std::size_t kVelMag = 0;
  constexpr std::size_t kVelAng = kHistogramBins;
  constexpr std::size_t kAccMag = 2 * kHistogramBins;
  constexpr std::size_t kAccAng = 3 * kHistogramBins;
  for (int s = 0; s + window_len <= frames; s += stride) {
    std::vector<double> hist(4 * kHistogramBins, 0.0);
    int velocity_samples = 0;
    for (const PointTrack& t : tracks) {
      bool have_prev = false;
      GridPoint prev_v;
      for (int k = s; k + 1 < s + window_len; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (!(t.valid[ku] && t.valid[ku + 1])) {
          have_prev = false;
          continue;
        }
        const GridPoint v{t.positions[ku + 1].row - t.positions[ku].row,
                          t.positions[ku + 1].col - t.positions[ku].col};
        hist[kVelMag + MagnitudeBin(std::hypot(v.row, v.col))] += 1.0;
        hist[kVelAng + AngleBin(std::atan2(v.row, v.col))] += 1.0;
        ++velocity_samples;
        if (have_prev) {
          const GridPoint acc{v.row - prev_v.row, v.col - prev_v.col};
          hist[kAccMag + MagnitudeBin(std::hypot(acc.row, acc.col))] += 1.0;
          hist[kAccAng + AngleBin(std::atan2(acc.row, acc.col))] += 1.0;
        }
        prev_v = v;
        have_prev = true;
      }
    }
    if (velocity_samples == 0) continue;
    for (std::size_t block = 0; block < 4; ++block) Normalize(hist, block * kHistogramBins);
    out.push_back({std::move(hist)});
  }
  return out;
}

double GaussianFrechet(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                       const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2) {
  CheckCovariance(cov1, "cov1");
  CheckCovariance(cov2, "cov2");
  if (mu1.size() != mu2.size() || cov1.rows() != mu1.size() ||
      cov2.rows() != mu2.size()) {
    throw std::invalid_argument("Gaussian dimensions do not match");
  }
  if (!mu1.allFinite() || !mu2.allFinite()) {
    throw std::invalid_argument("non-finite Gaussian mean");
  }
  const Eigen::MatrixXd s1 = SymmetricSqrt(0.5 * (cov1 + cov1.transpose()));
  Eigen::MatrixXd inner = s1 * cov2 * s1;
  inner = 0.5 * (inner + inner.transpose());
  const double cross = SymmetricSqrt(inner).trace();
  const double d = (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * cross;
  return std::max(0.0, d);
}

std::vector<MotionFeature> SequenceMotionFeatures(const FrameSequence& seq,
                                                  const FvmdConfig& cfg) {
  if (cfg.window_len < 3) throw std::invalid_argument("window_len must be at least 3");
  if (cfg.stride < 1) throw std::invalid_argument("stride must be at least 1");
  std::vector<MotionFeature> out;
  const int n = static_cast<int>(seq.size());
  for (int s = 0; s + cfg.window_len <= n; s += cfg.stride) {
    FrameSequence window(seq.modality_label());
    for (int i = s; i < s + cfg.window_len; ++i) window.Append(seq[static_cast<std::size_t>(i)]);
    const auto tracks = TrackGrid(window, cfg.spacing, cfg.window_radius);
    auto feats = ComputeMotionFeatures(tracks, cfg.window_len, cfg.window_len);
    for (auto& f : feats) out.push_back(std::move(f));
  }
  return out;
}

double Fvmd(const FrameSequence& pred, const FrameSequence& ref, const FvmdConfig& cfg) {
  const std::size_t min_frames = static_cast<std::size_t>(cfg.window_len) + 2;
  if (pred.size() < min_frames || ref.size() < min_frames) {
    throw std::invalid_argument("FVMD needs at least window_len + 2 frames per sequence");
  }
  const auto fp = SequenceMotionFeatures(pred, cfg);
  const auto fr = SequenceMotionFeatures(ref, cfg);
  if (fp.size() < 2 || fr.size() < 2) {
    throw std::invalid_argument("FVMD needs at least two motion-feature windows per sequence");
  }
  Eigen::VectorXd mu_p, mu_r;
  Eigen::MatrixXd cov_p, cov_r;
  FitGaussian(fp, mu_p, cov_p);
  FitGaussian(fr, mu_r, cov_r);
  return GaussianFrechet(mu_p, cov_p, mu_r, cov_r);
}

double PeakDistanceMetric(const FrameSequence& pred, const FrameSequence& ref) {
  if (pred.size() != ref.size()) throw std::invalid_argument("sequence lengths differ");
  if (pred.size() < 2) throw std::invalid_argument("peak distance needs at least two frames");
  if (!(pred.geometry() == ref.geometry())) {
    throw std::invalid_argument("sequence geometries differ");
  }
  double total = 0.0;
  for (std::size_t t = 1; t < pred.size(); ++t) {
    const auto dp = correlation::PeakDisplacement(
        correlation::Xcorr2(pred[t].heatmap, pred[t - 1].heatmap), false);
    const auto dr = correlation::PeakDisplacement(
        correlation::Xcorr2(ref[t].heatmap, ref[t - 1].heatmap), false);
    total += std::hypot(dp.d_range - dr.d_range, dp.d_azimuth - dr.d_azimuth);
  }
  return total / static_cast<double>(pred.size() - 1);
}

ApeReport Ape(const Trajectory& est, const Trajectory& gt) {
  if (est.size() != gt.size()) throw std::invalid_argument("trajectory lengths differ");
  if (est.empty()) throw std::invalid_argument("empty trajectories");
  std::vector<double> errors(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (std::abs(est[i].timestamp - gt[i].timestamp) > kTimestampTolerance) {
      throw std::invalid_argument("trajectory timestamps differ at pose " + std::to_string(i));
    }
    errors[i] = std::hypot(est[i].pose.x - gt[i].pose.x, est[i].pose.y - gt[i].pose.y);
  }
  const double n = static_cast<double>(errors.size());
  double sum = 0.0, sum_sq = 0.0;
  for (double e : errors) {
    sum += e;
    sum_sq += e * e;
  }
  ApeReport rep;
  rep.mean = sum / n;
  rep.rmse = std::sqrt(sum_sq / n);
  double var = 0.0;
  for (double e : errors) var += (e - rep.mean) * (e - rep.mean);
  rep.std = std::sqrt(var / n);
  return rep;
}

Point2 OccupancyGrid::origin() const {
  if (cells.empty()) return {};
  std::int64_t mx = cells.front().ix, my = cells.front().iy;
  for (const CellIndex& c : cells) {
    mx = std::min(mx, c.ix);
    my = std::min(my, c.iy);
  }
  return {static_cast<double>(mx) * resolution, static_cast<double>(my) * resolution};
}

OccupancyGrid RasterizeMap(const FrameSequence& seq, const Trajectory& traj,
                           double resolution, double threshold) {
  if (!(resolution > 0.0)) throw std::invalid_argument("map resolution must be positive");
  RequireAligned(seq, traj);
  OccupancyGrid grid;
  grid.resolution = resolution;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (const Point2& p : PolarToCart(seq[i].heatmap, traj[i].pose, threshold)) {
      grid.cells.push_back({static_cast<std::int64_t>(std::floor(p.x / resolution)),
                            static_cast<std::int64_t>(std::floor(p.y / resolution))});
    }
  }
  std::sort(grid.cells.begin(), grid.cells.end());
  grid.cells.erase(std::unique(grid.cells.begin(), grid.cells.end()), grid.cells.end());
  return grid;
}

double MapIou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (std::abs(a.resolution - b.resolution) > 1e-12 * std::max(a.resolution, b.resolution)) {
    throw std::invalid_argument("occupancy grids have different resolutions");
  }
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;

  auto extent = [](const OccupancyGrid& g, bool x_axis) {
    std::int64_t lo = INT64_MAX, hi = INT64_MIN;
    for (const CellIndex& c : g.cells) {
      const std::int64_t v = x_axis ? c.ix : c.iy;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo + 1;
  };
  const std::int64_t rx =
      std::max<std::int64_t>(1, (std::max(extent(a, true), extent(b, true)) + 1) / 2);
  const std::int64_t ry =
      std::max<std::int64_t>(1, (std::max(extent(a, false), extent(b, false)) + 1) / 2);
  const std::int64_t wx = 2 * rx + 1;
  const std::int64_t wy = 2 * ry + 1;
  std::vector<std::int32_t> counts(static_cast<std::size_t>(wx * wy), 0);
  for (const CellIndex& ca : a.cells) {
    for (const CellIndex& cb : b.cells) {
      const std::int64_t sx = ca.ix - cb.ix;
      const std::int64_t sy = ca.iy - cb.iy;
      if (sx < -rx || sx > rx || sy < -ry || sy > ry) continue;
      ++counts[static_cast<std::size_t>((sx + rx) * wy + (sy + ry))];
    }
  }
  std::int32_t best = -1;
  std::int64_t best_x = 0, best_y = 0;
  for (std::int64_t sx = -rx; sx <= rx; ++sx) {
    for (std::int64_t sy = -ry; sy <= ry; ++sy) {
      const std::int32_t n = counts[static_cast<std::size_t>((sx + rx) * wy + (sy + ry))];
      const std::int64_t m = sx * sx + sy * sy;
      const std::int64_t bm = best_x * best_x + best_y * best_y;
      if (n > best || (n == best && (m < bm || (m == bm && (sx < best_x ||
                                                            (sx == best_x && sy < best_y)))))) {
        best = n;
        best_x = sx;
        best_y = sy;
      }
    }
  }
  const double inter = static_cast<double>(best);
  const double uni = static_cast<double>(a.cells.size() + b.cells.size()) - inter;
  return inter / uni;
}

}  // namespace tcbench::metrics
