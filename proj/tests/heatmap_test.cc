#include <cmath>
#include <random>

#include "doctest.h"
#include "tcbench/heatmap.h"
#include "test_util.h"

using namespace tcbench;
using tcbench::testing::Geom;

TEST_SUITE("heatmap") {

TEST_CASE("angles normalize into (-pi, pi]") {
  CHECK(NormalizeAngle(kPi) == doctest::Approx(kPi));
  CHECK(NormalizeAngle(-kPi) == doctest::Approx(kPi));
  CHECK(NormalizeAngle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(NormalizeAngle(0.25) == 0.25);
  CHECK(Pose2D(0, 0, 7 * kPi).theta == doctest::Approx(kPi));
}

TEST_CASE("pose compose and inverse") {
  const Pose2D a(1.0, 2.0, 0.7);
  const Pose2D b(-0.5, 0.3, -1.2);
  const Pose2D id = a.Compose(a.Inverse());
  CHECK(id.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(id.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(id.theta == doctest::Approx(0.0).epsilon(1e-12));
  // Applying a composition equals applying each in turn.
  const Point2 p{0.4, -1.1};
  const Point2 q1 = a.Compose(b).Apply(p);
  const Point2 q2 = a.Apply(b.Apply(p));
  CHECK(q1.x == doctest::Approx(q2.x));
  CHECK(q1.y == doctest::Approx(q2.y));
}

TEST_CASE("heatmap rejects values outside [0, 1] and bad sizes") {
  const SensorGeometry g = Geom(8, 8);
  CHECK_THROWS_AS(Heatmap(g, std::vector<float>(64, 1.5f)), std::invalid_argument);
  CHECK_THROWS_AS(Heatmap(g, std::vector<float>(64, -0.1f)), std::invalid_argument);
  CHECK_THROWS_AS(Heatmap(g, std::vector<float>(63, 0.0f)), std::invalid_argument);
  std::vector<float> v(64, 0.0f);
  v[5] = std::nanf("");
  CHECK_THROWS_AS(Heatmap(g, v), std::invalid_argument);
  const std::vector<double> raw(64, 2.0);
  CHECK(Heatmap::FromClamped(g, raw).MaxValue() == 1.0f);
}

TEST_CASE("geometry validation") {
  SensorGeometry g = Geom(8, 8);
  CHECK_NOTHROW(g.Validate());
  g.n_range_bins = 7;
  CHECK_THROWS_AS(g.Validate(), std::invalid_argument);
  g = Geom(8, 8, 5.0, 0.0);
  CHECK_THROWS_AS(g.Validate(), std::invalid_argument);
  g = Geom(8, 8, 5.0, 360.0);
  CHECK_NOTHROW(g.Validate());
  g = Geom(8, 8, -1.0);
  CHECK_THROWS_AS(g.Validate(), std::invalid_argument);
}

TEST_CASE("polar_to_cart examples") {
  const SensorGeometry g = Geom(10, 9, 5.0, 100.0);
  CHECK(PolarToCart(Heatmap(g), Pose2D(1, 2, 0.3), 0.5).empty());

  // Row H-1 sits at range 4.75; centre column of an odd width is bearing 0.
  const Heatmap h = testing::Impulse(g, 9, 4);
  const auto pts = PolarToCart(h, Pose2D(), 0.5);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].x == doctest::Approx(4.75));
  CHECK(pts[0].y == doctest::Approx(0.0).epsilon(1e-12));

  const auto rot = PolarToCart(h, Pose2D(0, 0, kPi / 2), 0.5);
  REQUIRE(rot.size() == 1);
  CHECK(rot[0].x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rot[0].y == doctest::Approx(4.75));
}

TEST_CASE("polar_to_cart count and rigid equivariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const SensorGeometry g = Geom(12, 16);
    const Heatmap h = testing::RandomHeatmap(g, 100 + trial);
    const double thr = 0.7;
    std::size_t expected = 0;
    for (float v : h.values()) expected += v >= thr;
    const Pose2D pose(u(rng), u(rng), u(rng));
    const Pose2D t(u(rng), u(rng), u(rng));
    const auto base = PolarToCart(h, pose, thr);
    const auto moved = PolarToCart(h, t.Compose(pose), thr);
    REQUIRE(base.size() == expected);
    REQUIRE(moved.size() == expected);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const Point2 want = t.Apply(base[i]);
      CHECK(std::abs(moved[i].x - want.x) < 1e-9);
      CHECK(std::abs(moved[i].y - want.y) < 1e-9);
    }
  }
}

TEST_CASE("heatmap_mse examples and symmetry") {
  const SensorGeometry g = Geom(8, 8);
  const Heatmap zero(g);
  CHECK(HeatmapMse(zero, zero) == 0.0);
  CHECK(HeatmapMse(zero, testing::ConstantHeatmap(g, 0.5f)) == doctest::Approx(0.25));
  CHECK(HeatmapMse(zero, testing::ConstantHeatmap(g, 1.0f)) == doctest::Approx(1.0));
  const Heatmap a = testing::RandomHeatmap(g, 1);
  const Heatmap b = testing::RandomHeatmap(g, 2);
  CHECK(HeatmapMse(a, b) == HeatmapMse(b, a));
  CHECK(HeatmapMse(a, a) == 0.0);
  CHECK_THROWS_AS(HeatmapMse(a, Heatmap(Geom(8, 9))), std::invalid_argument);
}

TEST_CASE("shift uses zero fill") {
  const SensorGeometry g = Geom(8, 8);
  const Heatmap h = testing::Impulse(g, 2, 3);
  const Heatmap s = ShiftHeatmap(h, 2, -1);
  CHECK(s.at(4, 2) == 1.0f);
  CHECK(s.MaxValue() == 1.0f);
  CHECK(ShiftHeatmap(h, 8, 0).MaxValue() == 0.0f);
}

TEST_CASE("sequence and trajectory invariants") {
  const SensorGeometry g = Geom(8, 8);
  FrameSequence seq("x");
  seq.Append({0.0, Heatmap(g), Pose2D()});
  CHECK_THROWS_AS(seq.Append({0.0, Heatmap(g), Pose2D()}), std::invalid_argument);
  CHECK_THROWS_AS(seq.Append({0.1, Heatmap(Geom(8, 9)), Pose2D()}), std::invalid_argument);
  seq.Append({0.1, Heatmap(g), Pose2D(3, 4, 0)});
  CHECK(seq.GroundTruth().PathLength() == doctest::Approx(5.0));

  Trajectory t;
  t.Append(1.0, Pose2D());
  CHECK_THROWS_AS(t.Append(0.5, Pose2D()), std::invalid_argument);
  CHECK_THROWS_AS(FrameSequence().geometry(), std::exception);
}

}  // TEST_SUITE
