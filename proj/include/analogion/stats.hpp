#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace analogion {

struct ZTest {
  double z = 0.0;
  double p = 1.0;
  /// Pooled proportion was 0 or 1; z is reported as 0 and p as 1.
  bool degenerate = false;
};

/// Two-sided pooled z-test for k1/n1 vs k2/n2.
ZTest two_proportion_ztest(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2);

/// 1-based ranks with ties receiving the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman's rho: Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace analogion
