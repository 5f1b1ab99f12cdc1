#include "tcbench/heatmap.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tcbench {

double NormalizeAngle(double theta) {
  double wrapped = std::remainder(theta, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

void SensorGeometry::Validate() const {
  if (!(azimuth_fov_deg > 0.0 && azimuth_fov_deg <= 360.0)) {
    throw std::invalid_argument("azimuth_fov must lie in (0, 360]");
  }
  if (!(max_range > 0.0) || !std::isfinite(max_range)) {
    throw std::invalid_argument("max_range must be positive");
  }
  if (n_range_bins < 8 || n_azimuth_bins < 8) {
    throw std::invalid_argument("heatmap needs at least 8 range and azimuth bins");
  }
}

Pose2D Pose2D::Compose(const Pose2D& other) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return Pose2D(x + c * other.x - s * other.y, y + s * other.x + c * other.y,
                theta + other.theta);
}

Pose2D Pose2D::Inverse() const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return Pose2D(-c * x - s * y, s * x - c * y, -theta);
}

Point2 Pose2D::Apply(const Point2& p) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {x + c * p.x - s * p.y, y + s * p.x + c * p.y};
}

Heatmap::Heatmap(const SensorGeometry& geometry)
    : geometry_(geometry),
      values_(static_cast<std::size_t>(geometry.n_range_bins) *
                  geometry.n_azimuth_bins,
              0.0f) {
  geometry_.Validate();
}

Heatmap::Heatmap(const SensorGeometry& geometry, std::vector<float> values)
    : geometry_(geometry), values_(std::move(values)) {
  geometry_.Validate();
  if (values_.size() != static_cast<std::size_t>(geometry_.n_range_bins) *
                            geometry_.n_azimuth_bins) {
    throw std::invalid_argument("heatmap value count does not match geometry");
  }
  for (float v : values_) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw std::invalid_argument("heatmap values must be finite and in [0, 1]");
    }
  }
}

Heatmap Heatmap::FromClamped(const SensorGeometry& geometry,
                             std::span<const double> values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("non-finite heatmap value");
    }
    out[i] = static_cast<float>(std::clamp(values[i], 0.0, 1.0));
  }
  return Heatmap(geometry, std::move(out));
}

void Heatmap::Set(int row, int col, float value) {
  if (row < 0 || row >= rows() || col < 0 || col >= cols()) {
    throw std::out_of_range("heatmap index out of range");
  }
  if (!std::isfinite(value) || value < 0.0f || value > 1.0f) {
    throw std::invalid_argument("heatmap values must be finite and in [0, 1]");
  }
  values_[static_cast<std::size_t>(row) * cols() + col] = value;
}

float Heatmap::MaxValue() const {
  if (values_.empty()) return 0.0f;
  return *std::max_element(values_.begin(), values_.end());
}

std::vector<double> Heatmap::ToDouble() const {
  return {values_.begin(), values_.end()};
}

Heatmap ShiftHeatmap(const Heatmap& h, int d_row, int d_col) {
  const int rows = h.rows();
  const int cols = h.cols();
  std::vector<float> out(h.size(), 0.0f);
  for (int r = 0; r < rows; ++r) {
    const int src_r = r - d_row;
    if (src_r < 0 || src_r >= rows) continue;
    for (int c = 0; c < cols; ++c) {
      const int src_c = c - d_col;
      if (src_c < 0 || src_c >= cols) continue;
      out[static_cast<std::size_t>(r) * cols + c] = h.at(src_r, src_c);
    }
  }
  return Heatmap(h.geometry(), std::move(out));
}

Heatmap ScaleHeatmap(const Heatmap& h, double scale) {
  std::vector<double> v = h.ToDouble();
  for (double& x : v) x *= scale;
  return Heatmap::FromClamped(h.geometry(), v);
}

Trajectory::Trajectory(std::vector<TimedPose> poses) {
  for (const auto& p : poses) Append(p.timestamp, p.pose);
}

void Trajectory::Append(double timestamp, const Pose2D& pose) {
  if (!std::isfinite(timestamp)) {
    throw std::invalid_argument("trajectory timestamp must be finite");
  }
  if (!poses_.empty() && !(timestamp > poses_.back().timestamp)) {
    throw std::invalid_argument("trajectory timestamps must be strictly increasing");
  }
  poses_.push_back({timestamp, pose});
}

double Trajectory::PathLength() const {
  double total = 0.0;
  for (std::size_t i = 1; i < poses_.size(); ++i) {
    total += std::hypot(poses_[i].pose.x - poses_[i - 1].pose.x,
                        poses_[i].pose.y - poses_[i - 1].pose.y);
  }
  return total;
}

void FrameSequence::Append(Frame frame) {
  if (!std::isfinite(frame.timestamp)) {
    throw std::invalid_argument("frame timestamp must be finite");
  }
  if (!frames_.empty()) {
    if (!(frame.timestamp > frames_.back().timestamp)) {
      throw std::invalid_argument("frame timestamps must be strictly increasing");
    }
    if (!(frame.heatmap.geometry() == frames_.front().heatmap.geometry())) {
      throw std::invalid_argument("all frames in a sequence must share one geometry");
    }
  }
  frames_.push_back(std::move(frame));
}

const SensorGeometry& FrameSequence::geometry() const {
  if (frames_.empty()) throw std::invalid_argument("empty frame sequence");
  return frames_.front().heatmap.geometry();
}

Trajectory FrameSequence::GroundTruth() const {
  Trajectory t;
  for (const auto& f : frames_) t.Append(f.timestamp, f.pose);
  return t;
}

FrameSequence FrameSequence::WithHeatmaps(std::vector<Heatmap> heatmaps,
                                          std::string modality_label) const {
  if (heatmaps.size() != frames_.size()) {
    throw std::invalid_argument("heatmap count does not match sequence length");
  }
  FrameSequence out(std::move(modality_label));
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    out.Append({frames_[i].timestamp, std::move(heatmaps[i]), frames_[i].pose});
  }
  return out;
}

std::vector<Point2> PolarToCart(const Heatmap& h, const Pose2D& pose,
                                double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold must lie in [0, 1]");
  }
  const SensorGeometry& g = h.geometry();
  std::vector<Point2> points;
  for (int r = 0; r < h.rows(); ++r) {
    const double range = g.RangeOfRow(r);
    for (int c = 0; c < h.cols(); ++c) {
      if (h.at(r, c) < threshold) continue;
      const double az = g.AzimuthOfCol(c);
      points.push_back(pose.Apply({range * std::cos(az), range * std::sin(az)}));
    }
  }
  return points;
}

void RequireSameGeometry(const Heatmap& a, const Heatmap& b) {
  if (!(a.geometry() == b.geometry())) {
    throw std::invalid_argument("heatmap geometries differ");
  }
}

double HeatmapMse(const Heatmap& a, const Heatmap& b) {
  RequireSameGeometry(a, b);
  const auto va = a.values();
  const auto vb = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - static_cast<double>(vb[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(va.size());
}

}  // namespace tcbench
