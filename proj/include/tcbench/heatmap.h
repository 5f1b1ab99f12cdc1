#ifndef TCBENCH_HEATMAP_H_
#define TCBENCH_HEATMAP_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tcbench {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle into (-pi, pi].
double NormalizeAngle(double theta);

// Range-azimuth sensor layout. Rows index range bins, columns index azimuth
// bins; bin centers sit at (index + 0.5) * resolution.
struct SensorGeometry {
  double azimuth_fov_deg = 100.0;
  double max_range = 5.0;
  int n_range_bins = 32;
  int n_azimuth_bins = 32;

  // Throws std::invalid_argument when a field is out of range.
  void Validate() const;

  double range_resolution() const { return max_range / n_range_bins; }
  double azimuth_fov_rad() const { return azimuth_fov_deg * kPi / 180.0; }
  double azimuth_resolution_rad() const {
    return azimuth_fov_rad() / n_azimuth_bins;
  }
  double RangeOfRow(double row) const {
    return (row + 0.5) * range_resolution();
  }
  double AzimuthOfCol(double col) const {
    return -0.5 * azimuth_fov_rad() + (col + 0.5) * azimuth_resolution_rad();
  }

  bool operator==(const SensorGeometry&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// SE(2) pose; theta is kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_in, double y_in, double theta_in)
      : x(x_in), y(y_in), theta(NormalizeAngle(theta_in)) {}

  // this * other: `other` is expressed in this pose's frame.
  Pose2D Compose(const Pose2D& other) const;
  Pose2D Inverse() const;
  Point2 Apply(const Point2& p) const;

  bool operator==(const Pose2D&) const = default;
};

// H x W intensity grid, values finite and in [0, 1].
class Heatmap {
 public:
  Heatmap() = default;
  // All-zero heatmap.
  explicit Heatmap(const SensorGeometry& geometry);
  // Throws std::invalid_argument on size mismatch or values outside [0, 1].
  Heatmap(const SensorGeometry& geometry, std::vector<float> values);

  // Clamps every value into [0, 1]; non-finite values are rejected.
  static Heatmap FromClamped(const SensorGeometry& geometry,
                             std::span<const double> values);

  const SensorGeometry& geometry() const { return geometry_; }
  int rows() const { return geometry_.n_range_bins; }
  int cols() const { return geometry_.n_azimuth_bins; }
  std::size_t size() const { return values_.size(); }
  std::span<const float> values() const { return values_; }

  float at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * cols() + col];
  }
  void Set(int row, int col, float value);

  float MaxValue() const;
  std::vector<double> ToDouble() const;

  bool operator==(const Heatmap&) const = default;

 private:
  SensorGeometry geometry_;
  std::vector<float> values_;
};

// Integer translation with zero fill: out[r][c] = h[r - d_row][c - d_col].
Heatmap ShiftHeatmap(const Heatmap& h, int d_row, int d_col);

// Multiplies every value by `scale` and clamps into [0, 1].
Heatmap ScaleHeatmap(const Heatmap& h, double scale);

struct Frame {
  double timestamp = 0.0;
  Heatmap heatmap;
  Pose2D pose;
};

struct TimedPose {
  double timestamp = 0.0;
  Pose2D pose;
};

class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TimedPose> poses);

  // Throws std::invalid_argument unless timestamp is strictly increasing.
  void Append(double timestamp, const Pose2D& pose);

  const std::vector<TimedPose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return poses_[i]; }

  // Sum of consecutive position displacements.
  double PathLength() const;

 private:
  std::vector<TimedPose> poses_;
};

class FrameSequence {
 public:
  FrameSequence() = default;
  explicit FrameSequence(std::string modality_label)
      : modality_label_(std::move(modality_label)) {}

  // Enforces strictly increasing timestamps and a single shared geometry.
  void Append(Frame frame);

  const std::vector<Frame>& frames() const { return frames_; }
  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  const std::string& modality_label() const { return modality_label_; }
  void set_modality_label(std::string label) {
    modality_label_ = std::move(label);
  }
  // Geometry of the first frame; throws on an empty sequence.
  const SensorGeometry& geometry() const;

  Trajectory GroundTruth() const;
  // Same timestamps and poses with new heatmaps (size must match).
  FrameSequence WithHeatmaps(std::vector<Heatmap> heatmaps,
                             std::string modality_label) const;

 private:
  std::vector<Frame> frames_;
  std::string modality_label_;
};

// World coordinates of every cell with value >= threshold, bin-center
// convention, transformed by `pose`.
std::vector<Point2> PolarToCart(const Heatmap& h, const Pose2D& pose,
                                double threshold);

double HeatmapMse(const Heatmap& a, const Heatmap& b);

// Throws std::invalid_argument when geometries differ.
void RequireSameGeometry(const Heatmap& a, const Heatmap& b);

}  // namespace tcbench

#endif  // TCBENCH_HEATMAP_H_
