#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "thetafbsde/measures.hpp"
#include "thetafbsde/noise.hpp"

using namespace thetafbsde;

namespace {

double brute_w2(std::vector<double> a, std::vector<double> b) {
  std::sort(b.begin(), b.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += (a[i] - b[i]) * (a[i] - b[i]);
    best = std::min(best, s / static_cast<double>(a.size()));
  } while (std::next_permutation(b.begin(), b.end()));
  return std::sqrt(best);
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v)
    x = g(rng);
  return v;
}

} // namespace

TEST(EmpiricalMeasure, SortsAndValidates) {
  const EmpiricalMeasure m({3.0, 1.0, 2.0});
  EXPECT_EQ(m.samples()[0], 1.0);
  EXPECT_EQ(m.samples()[2], 3.0);
  EXPECT_THROW(EmpiricalMeasure(std::vector<double>{}), ConfigError);
  EXPECT_THROW(EmpiricalMeasure({1.0, std::nan("")}), ConfigError);
}

TEST(W2, Examples) {
  EXPECT_DOUBLE_EQ(w2(EmpiricalMeasure::dirac(0.3), EmpiricalMeasure::dirac(-1.2)), 1.5);
  const EmpiricalMeasure mu({0.1, 0.7, -2.0});
  EXPECT_EQ(w2(mu, mu), 0.0);
  EXPECT_DOUBLE_EQ(w2(EmpiricalMeasure({0.0, 1.0}), EmpiricalMeasure({1.0, 2.0})), 1.0);
  EXPECT_DOUBLE_EQ(brute_w2({0.0, 1.0}, {1.0, 2.0}), 1.0);
}

TEST(W2, UnequalSizesRejected) {
  EXPECT_THROW(w2(EmpiricalMeasure({0.0}), EmpiricalMeasure({0.0, 1.0})), UsageError);
}

TEST(W2, BruteForceOnSmallClouds) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 1 + k % 4;
    const auto a = draw(rng, n), b = draw(rng, n);
    EXPECT_NEAR(w2(EmpiricalMeasure(a), EmpiricalMeasure(b)), brute_w2(a, b), 1e-12);
  }
}

TEST(W2, MetricAndTranslation) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const EmpiricalMeasure a(draw(rng, 7)), b(draw(rng, 7)), c(draw(rng, 7));
    EXPECT_LE(w2(a, c), w2(a, b) + w2(b, c) + 1e-12);
    EXPECT_DOUBLE_EQ(w2(a, b), w2(b, a));
    EXPECT_NEAR(w2(a.shifted(0.37), b.shifted(0.37)), w2(a, b), 1e-12);
  }
}

TEST(W2, BoundedByCoupledSquaredDifference) {
  // Two clouds built from shared noise: W2^2 <= mean |Y1 - Y2|^2.
  const CounterNormal z(4);
  std::vector<double> y1(1000), y2(1000);
  for (std::size_t p = 0; p < y1.size(); ++p) {
    y1[p] = z(p, 0, 0);
    y2[p] = 0.8 * z(p, 0, 0) + 0.3 * z(p, 1, 0) + 0.1;
  }
  double msd = 0.0;
  for (std::size_t p = 0; p < y1.size(); ++p)
    msd += (y1[p] - y2[p]) * (y1[p] - y2[p]);
  msd /= static_cast<double>(y1.size());
  const double d = w2(EmpiricalMeasure(y1), EmpiricalMeasure(y2));
  EXPECT_LE(d * d, msd);
}

TEST(Moments, Examples) {
  const auto c = moments(EmpiricalMeasure({2.5, 2.5, 2.5}));
  EXPECT_EQ(c.mean, 2.5);
  EXPECT_EQ(c.stddev, 0.0);
  const auto p = moments(EmpiricalMeasure({0.0, 2.0}));
  EXPECT_DOUBLE_EQ(p.mean, 1.0);
  EXPECT_DOUBLE_EQ(p.stddev, 1.0);
  const auto q = moments(EmpiricalMeasure({1.0, 2.0, 3.0, 4.0}));
  EXPECT_DOUBLE_EQ(q.mean, 2.5);
  EXPECT_DOUBLE_EQ(q.stddev, std::sqrt(1.25));
}
