#include <cmath>

#include "doctest.h"
#include "tcbench/correlation.h"
#include "tcbench/metrics.h"
#include "tcbench/simulator.h"
#include "test_util.h"

using namespace tcbench;
using namespace tcbench::simulator;
using tcbench::testing::Geom;

namespace {

bool Inside(const Bounds& b, const Point2& p) {
  return p.x >= b.min_x - 1e-9 && p.x <= b.max_x + 1e-9 && p.y >= b.min_y - 1e-9 &&
         p.y <= b.max_y + 1e-9;
}

FrameSequence CorridorRun(int n_frames) {
  const World w = BuildWorld("corridor", 0);
  TrajectoryConfig tc;
  tc.n_frames = n_frames;
  return RenderSequence(w, SimulateTrajectory(w, tc), SensorGeometry{});
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("worlds are deterministic and seed sensitive") {
  CHECK(BuildWorld("room", 7) == BuildWorld("room", 7));
  CHECK(BuildWorld("office", 1).segments != BuildWorld("office", 2).segments);
  CHECK_THROWS_AS(BuildWorld("cave", 0), std::invalid_argument);
  for (const char* preset : {"room", "corridor", "office"}) {
    const World w = BuildWorld(preset, 3);
    REQUIRE(!w.segments.empty());
    for (const Segment& s : w.segments) {
      CHECK(Inside(w.bounds, s.a));
      CHECK(Inside(w.bounds, s.b));
    }
  }
}

TEST_CASE("corridor has two long parallel walls") {
  const World w = BuildWorld("corridor", 5);
  int long_parallel = 0;
  for (const Segment& s : w.segments) {
    const double len = std::hypot(s.b.x - s.a.x, s.b.y - s.a.y);
    if (len > 20.0 && std::abs(s.b.y - s.a.y) < 1e-12) ++long_parallel;
  }
  CHECK(long_parallel == 2);
}

TEST_CASE("trajectory examples") {
  const World room = BuildWorld("room", 0);
  TrajectoryConfig tc;
  tc.speed = 0.0;
  tc.n_frames = 5;
  const Trajectory still = SimulateTrajectory(room, tc);
  for (const TimedPose& p : still.poses()) CHECK(p.pose == still[0].pose);

  tc.speed = 0.5;
  tc.dt = 0.1;
  tc.n_frames = 10;
  CHECK(SimulateTrajectory(room, tc).PathLength() == doctest::Approx(0.45));

  // n - 1 steps of angular_rate * dt each.
  tc.kind = TrajectoryKind::kLoop;
  tc.n_frames = 100;
  tc.angular_rate = 2 * kPi / (tc.n_frames * tc.dt);
  const Trajectory loop = SimulateTrajectory(room, tc);
  const double expected = NormalizeAngle(2 * kPi * (tc.n_frames - 1) / tc.n_frames);
  CHECK(loop[99].pose.theta == doctest::Approx(expected).epsilon(1e-9));
  CHECK(std::abs(NormalizeAngle(loop[99].pose.theta - loop[0].pose.theta)) <=
        2 * kPi / tc.n_frames + 1e-9);
}

TEST_CASE("each step moves exactly speed * dt") {
  const World office = BuildWorld("office", 0);
  TrajectoryConfig tc;
  tc.kind = TrajectoryKind::kCorridorTurns;
  tc.angular_rate = 1.0;
  tc.n_frames = 60;
  tc.seed = 4;
  const Trajectory t = SimulateTrajectory(office, tc);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double d = std::hypot(t[i].pose.x - t[i - 1].pose.x, t[i].pose.y - t[i - 1].pose.y);
    CHECK(d == doctest::Approx(tc.speed * tc.dt));
  }
}

TEST_CASE("trajectory leaving bounds names the frame") {
  const World room = BuildWorld("room", 0);
  TrajectoryConfig tc;
  tc.speed = 5.0;
  tc.n_frames = 50;
  try {
    SimulateTrajectory(room, tc);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("frame 14") != std::string::npos);
  }
  tc.n_frames = 1;
  CHECK_THROWS_AS(SimulateTrajectory(room, tc), std::invalid_argument);
}

TEST_CASE("render: perpendicular wall at 2.5 m") {
  World w;
  w.segments = {{{2.5, -3.0}, {2.5, 3.0}}};
  w.bounds = {-5, -5, 5, 5};
  const SensorGeometry g = Geom(64, 16);
  const Heatmap h = RenderLidar(w, Pose2D(), g);
  // The centre columns look straight at the wall.
  for (int c : {7, 8}) {
    int best = 0;
    for (int r = 1; r < g.n_range_bins; ++r) {
      if (h.at(r, c) > h.at(best, c)) best = r;
    }
    CHECK((best == 31 || best == 32));
  }
  CHECK(RenderLidar(w, Pose2D(0, 0, kPi), g).MaxValue() == 0.0f);
  CHECK(RenderLidar(w, Pose2D(), g) == h);
}

TEST_CASE("degradation identity, determinism and value range") {
  const FrameSequence clean = CorridorRun(12);
  DegradationModel none;
  const FrameSequence same = Degrade(clean, none);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(same[i].heatmap == clean[i].heatmap);

  DegradationModel m;
  m.gaussian_sigma = 0.1;
  m.seed = 9;
  const FrameSequence a = Degrade(clean, m);
  const FrameSequence b = Degrade(clean, m);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(a[i].heatmap == b[i].heatmap);
    CHECK(a[i].timestamp == clean[i].timestamp);
    CHECK(a[i].pose == clean[i].pose);
  }

  m.ghost_count = 4;
  m.ghost_gain = 2.0;
  m.dropout_prob = 0.3;
  m.jitter_sigma = 3.0;
  const FrameSequence heavy = Degrade(clean, m);
  for (const Frame& f : heavy.frames()) {
    for (float v : f.heatmap.values()) CHECK((std::isfinite(v) && v >= 0.0f && v <= 1.0f));
  }

  m.dropout_prob = 1.5;
  CHECK_THROWS_AS(Degrade(clean, m), std::invalid_argument);
}

TEST_CASE("jitter shift is recovered by the correlation peak") {
  const FrameSequence clean = CorridorRun(20);
  DegradationModel m;
  m.jitter_sigma = 2.0;
  m.seed = 5;
  std::vector<DegradeTrace> traces;
  const FrameSequence d = Degrade(clean, m, &traces);
  REQUIRE(traces.size() == clean.size());
  int nonzero = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const auto c = correlation::Xcorr2(d[i].heatmap, clean[i].heatmap);
    const auto disp = correlation::PeakDisplacement(c, false);
    CHECK(disp.d_range == traces[i].shift_row);
    CHECK(disp.d_azimuth == traces[i].shift_col);
    nonzero += traces[i].shift_row != 0 || traces[i].shift_col != 0;
  }
  CHECK(nonzero > 0);
}

TEST_CASE("mean PSNR is non-increasing in gaussian_sigma") {
  const FrameSequence clean = CorridorRun(10);
  double prev = 1e300;
  for (double sigma : {0.0, 0.05, 0.1, 0.2}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      DegradationModel m;
      m.gaussian_sigma = sigma;
      m.seed = seed;
      const FrameSequence d = Degrade(clean, m);
      for (std::size_t i = 0; i < d.size(); ++i) {
        total += metrics::Psnr(d[i].heatmap, clean[i].heatmap);
      }
    }
    CHECK(total <= prev);
    prev = total;
  }
}

}  // TEST_SUITE
