#include "tcbench/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace tcbench::stats {
namespace {

void CheckInputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("inputs differ in length");
  if (x.size() < 3) throw std::invalid_argument("need at least three samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("inputs must be finite");
    }
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; });
  };
  if (constant(x) || constant(y)) {
    throw std::invalid_argument("correlation is undefined for a constant input");
  }
}

// Two-sided Student-t tail probability via the regularized incomplete beta.
double StudentTwoSided(double r, std::size_t n) {
  const double df = static_cast<double>(n) - 2.0;
  const double one_minus = 1.0 - r * r;
  if (one_minus <= 0.0) return 0.0;
  const double t2 = r * r * df / one_minus;
  return std::clamp(boost::math::ibeta(0.5 * df, 0.5, df / (df + t2)), 0.0, 1.0);
}

CorrelationResult PearsonUnchecked(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  CorrelationResult out;
  out.n = x.size();
  out.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  out.p_value = StudentTwoSided(out.coefficient, out.n);
  return out;
}

}  // namespace

std::vector<double> AverageRanks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult Pearson(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  return PearsonUnchecked(x, y);
}

CorrelationResult Spearman(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  const std::vector<double> rx = AverageRanks(x);
  const std::vector<double> ry = AverageRanks(y);
  return PearsonUnchecked(rx, ry);
}

CorrelationResult KendallTau(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  const std::size_t n = x.size();
  double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ties_x += 1.0;
      } else if (dy == 0.0) {
        ties_y += 1.0;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double s = concordant - discordant;
  CorrelationResult out;
  out.n = n;
  out.coefficient = std::clamp(
      s / std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y)),
      -1.0, 1.0);
  const double nd = static_cast<double>(n);
  const double z = s / std::sqrt(nd * (nd - 1.0) * (2.0 * nd + 5.0) / 18.0);
  out.p_value = std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
  return out;
}

}  // namespace tcbench::stats
