#include "doctest.h"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <vector>

#include "analogion/rng.hpp"
#include "analogion/stats.hpp"

using namespace analogion;

namespace {

struct Oracle {
  double z, p;
};

Oracle ztest_oracle(double k1, double n1, double k2, double n2) {
  const double pooled = (k1 + k2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2));
  const double z = (k1 / n1 - k2 / n2) / se;
  const boost::math::normal_distribution<double> n01;
  return {z, 2.0 * boost::math::cdf(boost::math::complement(n01, std::abs(z)))};
}

// O(n^2) average ranks: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> rank_oracle(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (double v : x) {
      smaller += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1 + smaller + (equal - 1) / 2;
  }
  return r;
}

double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = rank_oracle(x), ry = rank_oracle(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("two_proportion_ztest") {
  SUBCASE("equal proportions") {
    const auto t = two_proportion_ztest(50, 100, 30, 60);
    CHECK(t.z == doctest::Approx(0.0));
    CHECK(t.p == doctest::Approx(1.0));
  }
  SUBCASE("80/100 vs 60/100") {
    const auto t = two_proportion_ztest(80, 100, 60, 100);
    CHECK(t.z == doctest::Approx(3.0861).epsilon(1e-4));
    CHECK(t.p == doctest::Approx(0.002028).epsilon(1e-3));
  }
  SUBCASE("degenerate pools") {
    const auto zero = two_proportion_ztest(0, 10, 0, 10);
    CHECK(zero.degenerate);
    CHECK(zero.z == 0.0);
    CHECK(zero.p == 1.0);
    CHECK(two_proportion_ztest(10, 10, 5, 5).degenerate);
  }
  SUBCASE("random draws against a Boost.Math oracle; swap negates z") {
    Rng rng(12);
    int checked = 0;
    while (checked < 1000) {
      const std::size_t n1 = 1 + rng.uniform_index(500), n2 = 1 + rng.uniform_index(500);
      const std::size_t k1 = rng.uniform_index(n1 + 1), k2 = rng.uniform_index(n2 + 1);
      if ((k1 + k2 == 0) || (k1 + k2 == n1 + n2)) continue;
      const auto t = two_proportion_ztest(k1, n1, k2, n2);
      const auto o = ztest_oracle(k1, n1, k2, n2);
      CHECK(std::abs(t.z - o.z) < 1e-6);
      CHECK(std::abs(t.p - o.p) < 1e-6);
      const auto s = two_proportion_ztest(k2, n2, k1, n1);
      CHECK(s.z == doctest::Approx(-t.z));
      CHECK(s.p == doctest::Approx(t.p));
      ++checked;
    }
  }
}

TEST_CASE("ranks and Spearman") {
  SUBCASE("average ranks with ties") {
    const std::vector<double> x{3, 1, 4, 1, 5};
    CHECK(average_ranks(x) == std::vector<double>{3, 1.5, 4, 1.5, 5});
  }
  SUBCASE("monotone and reversed") {
    const std::vector<double> gold{1, 2, 3, 4, 5, 6};
    std::vector<double> up, down;
    for (double g : gold) {
      up.push_back(std::exp(g));
      down.push_back(-g * g);
    }
    CHECK(spearman(up, gold) == doctest::Approx(1.0));
    CHECK(spearman(down, gold) == doctest::Approx(-1.0));
  }
  SUBCASE("matches the rank oracle, with and without ties") {
    Rng rng(21);
    for (int t = 0; t < 300; ++t) {
      const std::size_t n = 3 + rng.uniform_index(30);
      const bool ties = t % 2 == 0;
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = ties ? static_cast<double>(rng.uniform_index(4)) : rng.normal();
        y[i] = ties ? static_cast<double>(rng.uniform_index(5)) : rng.normal();
      }
      const double o = spearman_oracle(x, y);
      if (!std::isfinite(o)) continue;
      CHECK(std::abs(spearman(x, y) - o) < 1e-9);
      // positive affine rescaling leaves rho unchanged
      std::vector<double> scaled(n);
      for (std::size_t i = 0; i < n; ++i) scaled[i] = 3.5 * x[i] + 2.0;
      CHECK(std::abs(spearman(scaled, y) - o) < 1e-9);
    }
  }
  SUBCASE("constant series") {
    const std::vector<double> c{2, 2, 2}, y{1, 2, 3};
    CHECK(pearson(c, y) == 0.0);
  }
}
