#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tcbench/stats.h"

using namespace tcbench::stats;

namespace {

using Vec = std::vector<double>;

// Tau-b by direct pair enumeration.
double KendallOracle(const Vec& x, const Vec& y) {
  double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++ties_x;
      } else if (dy == 0) {
        ++ties_y;
      } else if (dx * dy > 0) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  return (concordant - discordant) /
         std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
}

bool Constant(const Vec& v) {
  for (double x : v) {
    if (x != v[0]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("pearson examples") {
  CHECK(Pearson(Vec{1, 2, 3}, Vec{2, 4, 6}).coefficient == doctest::Approx(1.0));
  CHECK(Pearson(Vec{1, 2, 3}, Vec{6, 4, 2}).coefficient == doctest::Approx(-1.0));
  CHECK(Pearson(Vec{1, 2, 3, 4}, Vec{1, 3, 2, 4}).coefficient == doctest::Approx(0.8));
  CHECK(Pearson(Vec{1, 2, 3, 4}, Vec{1, 3, 2, 4}).n == 4);
}

TEST_CASE("spearman examples") {
  CHECK(Spearman(Vec{1, 2, 3, 4, 5}, Vec{0.1, 5, 7, 100, 101}).coefficient ==
        doctest::Approx(1.0));
  CHECK(Spearman(Vec{1, 2, 3}, Vec{3, 1, 2}).coefficient == doctest::Approx(-0.5));
  // Ranks (1, 2, 3, 4) vs (1.5, 1.5, 3.5, 3.5): r = 2 / sqrt(5).
  CHECK(Spearman(Vec{1, 2, 3, 4}, Vec{1, 1, 2, 2}).coefficient ==
        doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(2.0 / std::sqrt(5.0) == doctest::Approx(0.8944).epsilon(1e-4));
}

TEST_CASE("kendall examples") {
  CHECK(KendallTau(Vec{1, 2, 3, 4}, Vec{10, 20, 30, 40}).coefficient == doctest::Approx(1.0));
  CHECK(KendallTau(Vec{1, 2, 3}, Vec{3, 1, 2}).coefficient == doctest::Approx(-1.0 / 3.0));
  CHECK(KendallTau(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}).coefficient == doctest::Approx(-1.0));
}

TEST_CASE("average ranks") {
  CHECK(AverageRanks(Vec{10, 30, 20}) == Vec{1, 3, 2});
  CHECK(AverageRanks(Vec{5, 5, 1, 5}) == Vec{3, 3, 1, 3});
}

TEST_CASE("errors instead of nan") {
  CHECK_THROWS_AS(Pearson(Vec{1, 1, 1}, Vec{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Spearman(Vec{1, 2, 3}, Vec{2, 2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(KendallTau(Vec{4, 4, 4}, Vec{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Pearson(Vec{1, 2}, Vec{1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(Spearman(Vec{1, 2, 3}, Vec{1, 2}), std::invalid_argument);
}

TEST_CASE("p-values") {
  const CorrelationResult perfect = Pearson(Vec{1, 2, 3, 4}, Vec{2, 4, 6, 8});
  CHECK(perfect.p_value == doctest::Approx(0.0));
  // r = 0.8, n = 4: t = 0.8 sqrt(2 / 0.36) = 1.8856, two-sided p = 0.2.
  CHECK(Pearson(Vec{1, 2, 3, 4}, Vec{1, 3, 2, 4}).p_value == doctest::Approx(0.2).epsilon(1e-9));
  // tau = -1/3, n = 3: z = -(1/3) / sqrt(2 * 11 / (9 * 6)), two-sided normal.
  const double z = (1.0 / 3.0) / std::sqrt(2.0 * 11.0 / 54.0);
  CHECK(KendallTau(Vec{1, 2, 3}, Vec{3, 1, 2}).p_value ==
        doctest::Approx(std::erfc(z / std::sqrt(2.0))));
}

TEST_CASE("random inputs: oracle agreement and ranges") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(3, 8);
  std::uniform_int_distribution<int> small(0, 4);
  std::normal_distribution<double> n(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = len(rng);
    Vec x(k), y(k);
    const bool ties = trial % 2 == 0;
    for (int i = 0; i < k; ++i) {
      x[i] = ties ? small(rng) : n(rng);
      y[i] = ties ? small(rng) : n(rng);
    }
    if (Constant(x) || Constant(y)) continue;
    ++checked;
    const CorrelationResult kt = KendallTau(x, y);
    CHECK(kt.coefficient == doctest::Approx(KendallOracle(x, y)).epsilon(1e-12));
    const CorrelationResult sp = Spearman(x, y);
    CHECK(std::abs(sp.coefficient -
                   Pearson(AverageRanks(x), AverageRanks(y)).coefficient) <= 1e-12);
    for (const CorrelationResult& r : {kt, sp, Pearson(x, y)}) {
      CHECK(r.coefficient >= -1.0);
      CHECK(r.coefficient <= 1.0);
      CHECK(r.p_value >= 0.0);
      CHECK(r.p_value <= 1.0);
    }
  }
  CHECK(checked > 400);
}

TEST_CASE("monotone and affine invariance") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(10), y(10), fx(10), gy(10), ax(10);
    for (int i = 0; i < 10; ++i) {
      x[i] = n(rng);
      y[i] = x[i] + n(rng);
      fx[i] = std::exp(x[i]);
      gy[i] = y[i] * y[i] * y[i];
      ax[i] = 3.0 * x[i] - 7.0;
    }
    CHECK(Spearman(fx, gy).coefficient == doctest::Approx(Spearman(x, y).coefficient));
    CHECK(KendallTau(fx, gy).coefficient == doctest::Approx(KendallTau(x, y).coefficient));
    CHECK(Pearson(ax, y).coefficient == doctest::Approx(Pearson(x, y).coefficient));
  }
}

}  // TEST_SUITE
