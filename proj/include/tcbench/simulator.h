#ifndef TCBENCH_SIMULATOR_H_
#define TCBENCH_SIMULATOR_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcbench/heatmap.h"

namespace tcbench::simulator {

struct Segment {
  Point2 a;
  Point2 b;
  bool operator==(const Segment&) const = default;
};

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool Contains(const Point2& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool operator==(const Bounds&) const = default;
};

struct World {
  std::string preset;
  std::vector<Segment> segments;
  Bounds bounds;
  // Preset-defined starting pose for trajectories.
  Pose2D start;

  bool operator==(const World&) const = default;
};

// Presets: "room", "corridor", "office". Deterministic in (preset, seed).
World BuildWorld(const std::string& preset, std::uint64_t seed);

enum class TrajectoryKind { kStraight, kLoop, kCorridorTurns };

TrajectoryKind ParseTrajectoryKind(const std::string& name);
std::string TrajectoryKindName(TrajectoryKind kind);

struct TrajectoryConfig {
  TrajectoryKind kind = TrajectoryKind::kStraight;
  double speed = 0.5;         // m/s
  double angular_rate = 0.0;  // rad/s
  int n_frames = 120;
  double dt = 0.1;  // s
  std::uint64_t seed = 0;
  // Overrides World::start when set.
  std::optional<Pose2D> start;

  void Validate() const;
};

// Unicycle integration with the chord rule (rotate half, translate, rotate
// half), so every step displaces by exactly speed * dt.
//
// kStraight ignores angular_rate. kLoop turns at angular_rate every step.
// kCorridorTurns alternates straight legs with quarter turns at
// angular_rate; the seed picks each turn's direction.
//
// Throws std::invalid_argument naming the first frame outside world bounds.
Trajectory SimulateTrajectory(const World& world, const TrajectoryConfig& cfg);

// Ideal 2D LiDAR: one ray per azimuth bin, first hit below max_range lights
// its range bin. Along range the return is a Gaussian (sigma one bin) centred
// on the exact hit, scaled so the containing bin reads 1.
Heatmap RenderLidar(const World& world, const Pose2D& pose,
                    const SensorGeometry& geom);

// Renders one frame per trajectory pose.
FrameSequence RenderSequence(const World& world, const Trajectory& trajectory,
                             const SensorGeometry& geom,
                             const std::string& modality_label = "lidar");

struct DegradationModel {
  double gaussian_sigma = 0.0;
  int ghost_count = 0;
  double ghost_gain = 0.0;
  double dropout_prob = 0.0;
  double jitter_sigma = 0.0;  // bins
  std::uint64_t seed = 0;

  void Validate() const;
  bool IsIdentity() const;
};

// What degradation did to one frame.
struct DegradeTrace {
  int shift_row = 0;
  int shift_col = 0;
};

// Degrades one frame using the PRNG stream for (model.seed, frame_index).
Heatmap DegradeFrame(const Heatmap& h, const DegradationModel& model,
                     std::uint64_t frame_index, DegradeTrace* trace = nullptr);

// Per frame: jitter shift, ghost blobs, additive noise, dropout, clamp.
// Timestamps and poses pass through untouched.
FrameSequence Degrade(const FrameSequence& seq, const DegradationModel& model,
                      std::vector<DegradeTrace>* traces = nullptr);

}  // namespace tcbench::simulator

#endif  // TCBENCH_SIMULATOR_H_
