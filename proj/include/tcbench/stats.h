#ifndef TCBENCH_STATS_H_
#define TCBENCH_STATS_H_

#include <cstddef>
#include <span>
#include <vector>

namespace tcbench::stats {

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;  // two-sided, approximate
  std::size_t n = 0;
};

// Product-moment r; p-value from t = r sqrt((n - 2) / (1 - r^2)) with n - 2
// degrees of freedom. Throws std::invalid_argument for n < 3, unequal
// lengths or a constant input.
CorrelationResult Pearson(std::span<const double> x, std::span<const double> y);

// Pearson on average ranks, same t approximation.
CorrelationResult Spearman(std::span<const double> x, std::span<const double> y);

// Tau-b. p-value from the normal approximation with variance
// n (n - 1) (2n + 5) / 18 (no tie correction).
CorrelationResult KendallTau(std::span<const double> x, std::span<const double> y);

// 1-based average ranks; tied values share the mean of their positions.
std::vector<double> AverageRanks(std::span<const double> x);

}  // namespace tcbench::stats

#endif  // TCBENCH_STATS_H_
