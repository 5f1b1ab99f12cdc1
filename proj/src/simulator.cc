#include "tcbench/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace tcbench::simulator {
namespace {

constexpr double kSmearSigmaBins = 1.0;
constexpr int kSmearRadiusBins = 3;
constexpr double kGhostSigmaBins = 1.0;
constexpr int kGhostRadiusBins = 3;

std::mt19937_64 StreamFor(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

void AddBox(std::vector<Segment>& segs, double cx, double cy, double hw,
            double hh) {
  const Point2 p0{cx - hw, cy - hh};
  const Point2 p1{cx + hw, cy - hh};
  const Point2 p2{cx + hw, cy + hh};
  const Point2 p3{cx - hw, cy + hh};
  segs.push_back({p0, p1});
  segs.push_back({p1, p2});
  segs.push_back({p2, p3});
  segs.push_back({p3, p0});
}

void AddRectangle(std::vector<Segment>& segs, const Bounds& b) {
  AddBox(segs, 0.5 * (b.min_x + b.max_x), 0.5 * (b.min_y + b.max_y),
         0.5 * (b.max_x - b.min_x), 0.5 * (b.max_y - b.min_y));
}

World BuildRoom(std::uint64_t seed) {
  World w;
  w.preset = "room";
  w.bounds = {0.0, 0.0, 8.0, 6.0};
  AddRectangle(w.segments, w.bounds);
  std::mt19937_64 rng = StreamFor(seed, 0);
  std::uniform_real_distribution<double> ux(4.0, 7.2);
  std::uniform_real_distribution<double> uy(0.8, 5.2);
  std::uniform_real_distribution<double> usize(0.2, 0.4);
  for (int i = 0; i < 3; ++i) {
    AddBox(w.segments, ux(rng), uy(rng), usize(rng), usize(rng));
  }
  w.start = Pose2D(1.5, 3.0, 0.0);
  return w;
}

// Long 2 m corridor along +x crossed by door frames about every metre. Each
// frame is a pair of stubs from opposite walls leaving a central opening.
// Their faces are perpendicular to the direction of travel; the side walls
// alone would look identical from every point along the corridor.
World BuildCorridor(std::uint64_t seed) {
  World w;
  w.preset = "corridor";
  constexpr double kHalfWidth = 1.0;
  constexpr double kStartX = -1.0;
  constexpr double kEndX = 40.0;
  w.bounds = {kStartX, -kHalfWidth, kEndX, kHalfWidth};
  w.segments.push_back({{kStartX, -kHalfWidth}, {kEndX, -kHalfWidth}});
  w.segments.push_back({{kStartX, kHalfWidth}, {kEndX, kHalfWidth}});
  w.segments.push_back({{kStartX, -kHalfWidth}, {kStartX, kHalfWidth}});
  w.segments.push_back({{kEndX, -kHalfWidth}, {kEndX, kHalfWidth}});

  std::mt19937_64 rng = StreamFor(seed, 0);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> depth(0.42, 0.98);
  for (double x = 1.0; x < kEndX - 1.0; x += 1.0) {
    const double fx = x + jitter(rng);
    w.segments.push_back({{fx, -kHalfWidth}, {fx, -kHalfWidth + depth(rng)}});
    w.segments.push_back({{fx, kHalfWidth}, {fx, kHalfWidth - depth(rng)}});
  }
  w.start = Pose2D(0.0, 0.0, 0.0);
  return w;
}

World BuildOffice(std::uint64_t seed) {
  World w;
  w.preset = "office";
  w.bounds = {0.0, 0.0, 12.0, 10.0};
  AddRectangle(w.segments, w.bounds);
  std::mt19937_64 rng = StreamFor(seed, 0);
  std::uniform_real_distribution<double> ux(3.5, 11.0);
  std::uniform_real_distribution<double> uy(1.0, 9.0);
  std::uniform_real_distribution<double> ulen(0.8, 2.5);
  std::bernoulli_distribution horizontal(0.5);
  for (int i = 0; i < 5; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    const double len = ulen(rng);
    if (horizontal(rng)) {
      w.segments.push_back({{x, y}, {std::min(x + len, 11.8), y}});
    } else {
      w.segments.push_back({{x, y}, {x, std::min(y + len, 9.8)}});
    }
  }
  std::uniform_real_distribution<double> usize(0.3, 0.6);
  for (int i = 0; i < 4; ++i) {
    AddBox(w.segments, ux(rng), uy(rng), usize(rng), usize(rng));
  }
  w.start = Pose2D(1.5, 5.0, 0.0);
  return w;
}

// Distance along the unit ray to the segment, or +inf.
double RaySegment(const Point2& o, double dx, double dy, const Segment& s) {
  const double ex = s.b.x - s.a.x;
  const double ey = s.b.y - s.a.y;
  const double denom = dx * ey - dy * ex;
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
  const double wx = s.a.x - o.x;
  const double wy = s.a.y - o.y;
  const double t = (wx * ey - wy * ex) / denom;
  const double u = (wx * dy - wy * dx) / denom;
  if (t <= 1e-9 || u < 0.0 || u > 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  return t;
}

}  // namespace

World BuildWorld(const std::string& preset, std::uint64_t seed) {
  if (preset == "room") return BuildRoom(seed);
  if (preset == "corridor") return BuildCorridor(seed);
  if (preset == "office") return BuildOffice(seed);
  throw std::invalid_argument("unknown world preset: " + preset);
}

TrajectoryKind ParseTrajectoryKind(const std::string& name) {
  if (name == "straight") return TrajectoryKind::kStraight;
  if (name == "loop") return TrajectoryKind::kLoop;
  if (name == "corridor-turns") return TrajectoryKind::kCorridorTurns;
  throw std::invalid_argument("unknown trajectory kind: " + name);
}

std::string TrajectoryKindName(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kStraight:
      return "straight";
    case TrajectoryKind::kLoop:
      return "loop";
    case TrajectoryKind::kCorridorTurns:
      return "corridor-turns";
  }
  return "straight";
}

void TrajectoryConfig::Validate() const {
  if (n_frames < 2) throw std::invalid_argument("n_frames must be at least 2");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(speed >= 0.0)) throw std::invalid_argument("speed must be non-negative");
  if (!std::isfinite(angular_rate)) {
    throw std::invalid_argument("angular_rate must be finite");
  }
}

Trajectory SimulateTrajectory(const World& world, const TrajectoryConfig& cfg) {
  cfg.Validate();
  const Pose2D start = cfg.start.value_or(world.start);
  if (!world.bounds.Contains({start.x, start.y})) {
    throw std::invalid_argument("trajectory start pose lies outside world bounds");
  }

  // Per-step heading rate for every frame transition.
  std::vector<double> rates(static_cast<std::size_t>(cfg.n_frames - 1), 0.0);
  switch (cfg.kind) {
    case TrajectoryKind::kStraight:
      break;
    case TrajectoryKind::kLoop:
      std::fill(rates.begin(), rates.end(), cfg.angular_rate);
      break;
    case TrajectoryKind::kCorridorTurns: {
      const int leg = std::max(1, (cfg.n_frames - 1) / 5);
      const double rate = std::abs(cfg.angular_rate);
      const int turn_steps =
          rate > 0.0 ? std::max(1, static_cast<int>(std::lround(
                                       0.5 * kPi / (rate * cfg.dt))))
                     : 0;
      std::mt19937_64 rng = StreamFor(cfg.seed, 0);
      std::bernoulli_distribution left(0.5);
      std::size_t i = static_cast<std::size_t>(leg);
      while (i < rates.size() && turn_steps > 0) {
        const double dir = left(rng) ? 1.0 : -1.0;
        for (int k = 0; k < turn_steps && i < rates.size(); ++k, ++i) {
          rates[i] = dir * rate;
        }
        i += static_cast<std::size_t>(leg);
      }
      break;
    }
  }

  Trajectory traj;
  double x = start.x;
  double y = start.y;
  double theta = start.theta;
  traj.Append(0.0, Pose2D(x, y, theta));
  const double step = cfg.speed * cfg.dt;
  for (int k = 1; k < cfg.n_frames; ++k) {
    const double dtheta = rates[static_cast<std::size_t>(k - 1)] * cfg.dt;
    const double mid = theta + 0.5 * dtheta;
    x += step * std::cos(mid);
    y += step * std::sin(mid);
    theta += dtheta;
    if (!world.bounds.Contains({x, y})) {
      throw std::invalid_argument("trajectory exits world bounds at frame " +
                                  std::to_string(k));
    }
    traj.Append(k * cfg.dt, Pose2D(x, y, theta));
  }
  return traj;
}

Heatmap RenderLidar(const World& world, const Pose2D& pose,
                    const SensorGeometry& geom) {
  geom.Validate();
  const int rows = geom.n_range_bins;
  const int cols = geom.n_azimuth_bins;
  const double res = geom.range_resolution();
  std::vector<float> values(static_cast<std::size_t>(rows) * cols, 0.0f);
  const Point2 origin{pose.x, pose.y};
  for (int c = 0; c < cols; ++c) {
    const double angle = pose.theta + geom.AzimuthOfCol(c);
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    double hit = std::numeric_limits<double>::infinity();
    for (const Segment& s : world.segments) {
      hit = std::min(hit, RaySegment(origin, dx, dy, s));
    }
    if (!(hit < geom.max_range)) continue;
    // Gaussian centred on the exact hit, scaled so the containing bin is 1.
    const int center = std::min(rows - 1, static_cast<int>(hit / res));
    const double hit_row = hit / res - 0.5;
    auto profile = [&](int r) {
      const double d = (r - hit_row) / kSmearSigmaBins;
      return std::exp(-0.5 * d * d);
    };
    const double peak = profile(center);
    for (int r = std::max(0, center - kSmearRadiusBins);
         r <= std::min(rows - 1, center + kSmearRadiusBins); ++r) {
      values[static_cast<std::size_t>(r) * cols + c] =
          static_cast<float>(std::min(1.0, profile(r) / peak));
    }
  }
  return Heatmap(geom, std::move(values));
}

FrameSequence RenderSequence(const World& world, const Trajectory& trajectory,
                             const SensorGeometry& geom,
                             const std::string& modality_label) {
  FrameSequence seq(modality_label);
  for (const TimedPose& tp : trajectory.poses()) {
    seq.Append({tp.timestamp, RenderLidar(world, tp.pose, geom), tp.pose});
  }
  return seq;
}

void DegradationModel::Validate() const {
  if (!(gaussian_sigma >= 0.0) || ghost_count < 0 || !(ghost_gain >= 0.0) ||
      !(jitter_sigma >= 0.0)) {
    throw std::invalid_argument("degradation parameters must be non-negative");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) {
    throw std::invalid_argument("dropout_prob must lie in [0, 1]");
  }
}

bool DegradationModel::IsIdentity() const {
  return gaussian_sigma == 0.0 && (ghost_count == 0 || ghost_gain == 0.0) &&
         dropout_prob == 0.0 && jitter_sigma == 0.0;
}

Heatmap DegradeFrame(const Heatmap& h, const DegradationModel& model,
                     std::uint64_t frame_index, DegradeTrace* trace) {
  model.Validate();
  std::mt19937_64 rng = StreamFor(model.seed, frame_index);
  DegradeTrace applied;
  if (model.jitter_sigma > 0.0) {
    std::normal_distribution<double> jitter(0.0, model.jitter_sigma);
    applied.shift_row = static_cast<int>(std::lround(jitter(rng)));
    applied.shift_col = static_cast<int>(std::lround(jitter(rng)));
  }
  if (trace != nullptr) *trace = applied;

  const Heatmap shifted = ShiftHeatmap(h, applied.shift_row, applied.shift_col);
  const int rows = h.rows();
  const int cols = h.cols();
  std::vector<double> v = shifted.ToDouble();

  if (model.ghost_count > 0 && model.ghost_gain > 0.0) {
    std::uniform_int_distribution<int> urow(0, rows - 1);
    std::uniform_int_distribution<int> ucol(0, cols - 1);
    for (int g = 0; g < model.ghost_count; ++g) {
      const int gr = urow(rng);
      const int gc = ucol(rng);
      for (int r = std::max(0, gr - kGhostRadiusBins);
           r <= std::min(rows - 1, gr + kGhostRadiusBins); ++r) {
        for (int c = std::max(0, gc - kGhostRadiusBins);
             c <= std::min(cols - 1, gc + kGhostRadiusBins); ++c) {
          const double d2 = ((r - gr) * (r - gr) + (c - gc) * (c - gc)) /
                            (kGhostSigmaBins * kGhostSigmaBins);
          v[static_cast<std::size_t>(r) * cols + c] +=
              model.ghost_gain * std::exp(-0.5 * d2);
        }
      }
    }
  }
  if (model.gaussian_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, model.gaussian_sigma);
    for (double& x : v) x += noise(rng);
  }
  if (model.dropout_prob > 0.0) {
    std::bernoulli_distribution drop(model.dropout_prob);
    for (double& x : v) {
      if (drop(rng)) x = 0.0;
    }
  }
  return Heatmap::FromClamped(h.geometry(), v);
}

FrameSequence Degrade(const FrameSequence& seq, const DegradationModel& model,
                      std::vector<DegradeTrace>* traces) {
  model.Validate();
  std::vector<Heatmap> out;
  out.reserve(seq.size());
  if (traces != nullptr) traces->assign(seq.size(), {});
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out.push_back(DegradeFrame(seq[i].heatmap, model, i,
                               traces != nullptr ? &(*traces)[i] : nullptr));
  }
  return seq.WithHeatmaps(std::move(out), seq.modality_label());
}

}  // namespace tcbench::simulator
