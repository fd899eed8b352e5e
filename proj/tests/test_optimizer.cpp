#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "thetafbsde/optimizer.hpp"

using namespace thetafbsde;

namespace {

const IntervalUnion kU({{-2.0, -1.0}, {1.0, 2.0}});
const IntervalUnion kWide(-10.0, 10.0);

StateView at_y(double y) {
  StateView s;
  s.y = y;
  return s;
}

// Root of a^3 + a = c by bisection (monotone cubic).
double cubic_root(double c) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (m * m * m + m < c ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

IntervalUnion random_union(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> parts(1, 4);
  std::uniform_real_distribution<double> len(0.0, 1.5), gap(0.01, 1.0), start(-3.0, 0.0);
  std::vector<Interval> v;
  double x = start(rng);
  for (int i = parts(rng); i > 0; --i) {
    const double l = len(rng);
    v.push_back({x, x + l});
    x += l + gap(rng);
  }
  return IntervalUnion(v);
}

} // namespace

TEST(Driver, RejectsBadParameters) {
  EXPECT_THROW(Driver::quartic(1.0, 1.0), ParameterError);
  EXPECT_THROW(Driver::quartic(2.0, 0.0), ParameterError);
  EXPECT_THROW(Driver::quadratic_penalty(0.0, 0.6), ParameterError);
}

TEST(MaximizeOver, QuarticAtZero) {
  const auto r = maximize_over(kWide, Driver::quartic(2.0, 1.0), at_y(0.0));
  EXPECT_NEAR(r.a_star, 0.0, 1e-12);
  EXPECT_EQ(r.boundary, ActiveBoundary::interior);
}

TEST(MaximizeOver, PenaltyReducesToProjection) {
  for (BaseValue f0 : {BaseValue{ZeroBase{}}, BaseValue{LinearBase{0.5}}}) {
    const auto r = maximize_over(kU, Driver::quadratic_penalty(1.0, 0.6, f0), at_y(0.3));
    EXPECT_EQ(r.a_star, 1.0);
    EXPECT_EQ(r.boundary, ActiveBoundary::lower);
    EXPECT_FALSE(r.tie);
  }
}

TEST(MaximizeOver, QuarticMatchesCubicRoot) {
  const double oracle = cubic_root(0.2);
  EXPECT_NEAR(oracle, 0.19283, 1e-5);
  const auto r = maximize_over(kWide, Driver::quartic(2.0, 1.0), at_y(0.1));
  EXPECT_NEAR(r.a_star, oracle, 1e-10);
}

TEST(MaximizeOver, TieFlaggedTowardSmaller) {
  const auto r = maximize_over(kU, Driver::quadratic_penalty(1.0, 0.0), at_y(0.0));
  EXPECT_EQ(r.a_star, -1.0);
  EXPECT_TRUE(r.tie);
}

TEST(MaximizeOver, NonConcaveDriverRaisesAudit) {
  GenericDriver g;
  g.value = [](const StateView&, double a) { return a * a; };
  g.da = [](const StateView&, double a) { return 2.0 * a; };
  g.daa = [](const StateView&, double) { return 2.0; };
  g.kappa = 1.0;
  EXPECT_THROW(maximize_over(kU, Driver(g), at_y(0.0)), AuditError);
}

TEST(MaximizeOver, ResidualBoundarySignsAndDominance) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> y(-2.0, 2.0), u(0.0, 1.0), lam(1.1, 4.0);
  for (int k = 0; k < 200; ++k) {
    const auto set = random_union(rng);
    const Driver f = Driver::quartic(lam(rng), 1.0);
    const StateView s = at_y(y(rng));
    const auto r = maximize_over(set, f, s);
    ASSERT_TRUE(set.contains(r.a_star));
    EXPECT_DOUBLE_EQ(r.value, f.value(s, r.a_star));
    switch (r.boundary) {
    case ActiveBoundary::interior:
      EXPECT_LE(std::abs(f.da(s, r.a_star)), 1e-10);
      break;
    case ActiveBoundary::lower:
      EXPECT_LE(f.da(s, r.a_star), 0.0);
      break;
    case ActiveBoundary::upper:
      EXPECT_GE(f.da(s, r.a_star), 0.0);
      break;
    }
    for (int m = 0; m < 1000; ++m) {
      const auto& iv = set.intervals()[static_cast<std::size_t>(u(rng) * static_cast<double>(set.size()))];
      const double member = iv.lo + u(rng) * (iv.hi - iv.lo);
      ASSERT_GE(r.value, f.value(s, member) - 1e-10);
    }
  }
}

TEST(MaximizeOver, QuarticFocConsistency) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> y(-3.0, 3.0), g(0.2, 2.0), extra(0.1, 2.0);
  for (int k = 0; k < 200; ++k) {
    const double gamma = g(rng), lambda = gamma + extra(rng), yy = y(rng);
    const double a = quartic_argmax(Driver::quartic(lambda, gamma), yy);
    EXPECT_LE(std::abs(gamma * a * a * a + (lambda - gamma) * a - lambda * yy), 1e-10);
  }
}

TEST(DriverG, Examples) {
  EXPECT_EQ(quartic_G(Driver::quartic(2.0, 1.0), 0.0), 0.0);
  EXPECT_EQ(driver_G(kU, Driver::quadratic_penalty(1.0, 1.5), at_y(0.7)), 0.0);
  EXPECT_DOUBLE_EQ(driver_G(kU, Driver::quadratic_penalty(1.0, 0.6), at_y(0.0)), -0.08);
}

TEST(DriverG, MonotoneInSetInclusion) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> y(-2.0, 2.0);
  const Driver f = Driver::quartic(2.5, 1.0);
  for (int k = 0; k < 200; ++k) {
    const auto set = random_union(rng);
    const StateView s = at_y(y(rng));
    EXPECT_GE(driver_G(convex_hull(set), f, s), driver_G(set, f, s) - 1e-15);
  }
}

TEST(Envelope, Examples) {
  const Driver f = Driver::quartic(2.0, 1.0);
  EXPECT_EQ(envelope_dG_dy(f, 0.0), 0.0);
  const double h = 1e-4;
  EXPECT_LE(std::abs((quartic_G(f, h) - quartic_G(f, -h)) / (2.0 * h)), 1e-6);
  EXPECT_NEAR(envelope_dG_dy(f, 0.1), 2.0 * (cubic_root(0.2) - 0.1), 1e-9);
  EXPECT_NEAR(envelope_dG_dy(f, 0.1), 0.18566, 1e-5);
  // Envelope derivative against a central difference away from zero.
  for (double y : {-0.7, 0.25, 1.3})
    EXPECT_NEAR(envelope_dG_dy(f, y), (quartic_G(f, y + h) - quartic_G(f, y - h)) / (2.0 * h), 1e-6);
}

TEST(Envelope, OtherFamiliesUnsupported) {
  EXPECT_THROW(envelope_dG_dy(Driver::quadratic_penalty(1.0, 0.0), 0.0), UsageError);
  EXPECT_THROW(second_derivative_at_zero(Driver::zero()), UsageError);
}

TEST(SecondDerivative, Examples) {
  const auto a = second_derivative_at_zero(Driver::quartic(2.0, 1.0));
  EXPECT_DOUBLE_EQ(a.analytic, 2.0);
  EXPECT_LE(std::abs(a.numeric - 2.0) / 2.0, 1e-4);
  const auto b = second_derivative_at_zero(Driver::quartic(3.0, 1.0));
  EXPECT_DOUBLE_EQ(b.analytic, 1.5);
  EXPECT_LE(std::abs(b.numeric - 1.5) / 1.5, 1e-4);
}

TEST(ConcavityAudit, Families) {
  const auto pen = concavity_audit(Driver::quadratic_penalty(1.0, 0.6), 1000);
  EXPECT_TRUE(pen.pass);
  EXPECT_DOUBLE_EQ(pen.min_modulus, 1.0);

  const auto q = concavity_audit(Driver::quartic(2.0, 1.0), 2000);
  EXPECT_TRUE(q.pass);
  EXPECT_EQ(q.declared_modulus, 1.0);
  EXPECT_GE(q.min_modulus, 1.0 - 1e-12);

  GenericDriver g;
  g.value = [](const StateView&, double a) { return -a * a * a * a; };
  g.da = [](const StateView&, double a) { return -4.0 * a * a * a; };
  g.daa = [](const StateView&, double a) { return -12.0 * a * a; };
  g.kappa = 0.5;
  const auto bad = concavity_audit(Driver(g), 1000);
  EXPECT_FALSE(bad.pass);
  ASSERT_TRUE(bad.witness);
  EXPECT_GT(bad.witness->second_derivative, -0.5);
}

TEST(LipschitzProbe, ConvexProjectionIsOneLipschitz) {
  // a* = projection of w0 on an interval whose endpoints move with the mean.
  const AmbiguityMap sets(IntervalUnion(-1.0, 1.0), AffineMomentTheta{1.0, 0.0}, {{1.0, 1.0}}, -2.0, 2.0);
  const Driver f = Driver::quadratic_penalty(1.0, 0.6);
  PairSampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> m(-2.0, 2.0);
    ProbePoint a, b;
    a.law = EmpiricalMeasure({m(rng), m(rng)});
    b.law = EmpiricalMeasure({m(rng), m(rng)});
    return std::pair{a, b};
  };
  const auto r = lipschitz_probe(sets, f, sampler, 2000);
  EXPECT_GT(r.evaluated, 1000u);
  EXPECT_LE(r.max_ratio, 1.0 + 1e-9);
}

TEST(LipschitzProbe, IdenticalPairsExcluded) {
  PairSampler same = [](std::mt19937_64&) {
    ProbePoint p;
    p.y = 0.3;
    return std::pair{p, p};
  };
  const auto r = lipschitz_probe(AmbiguityMap::fixed(kWide), Driver::quartic(2.0, 1.0), same, 10);
  EXPECT_EQ(r.zero_distance, 10u);
  EXPECT_EQ(r.evaluated, 0u);
}

TEST(LipschitzProbe, QuarticSlopeNearZero) {
  PairSampler near_zero = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> y(-1e-4, 1e-4);
    ProbePoint a, b;
    a.y = y(rng);
    b.y = y(rng);
    a.law = EmpiricalMeasure::dirac(0.0);
    b.law = a.law;
    return std::pair{a, b};
  };
  const auto r = lipschitz_probe(AmbiguityMap::fixed(kWide), Driver::quartic(2.0, 1.0), near_zero, 500);
  EXPECT_NEAR(r.max_ratio, 2.0, 1e-3);
}

TEST(LipschitzProbe, TiePairsExcluded) {
  // w0 straddles the gap midpoint of U: the optimum jumps between intervals.
  PairSampler across = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(1e-3, 1e-2);
    ProbePoint a, b;
    a.y = -d(rng);
    b.y = d(rng);
    return std::pair{a, b};
  };
  GenericDriver g;
  g.value = [](const StateView& s, double a) { return -0.5 * (a - s.y) * (a - s.y); };
  g.da = [](const StateView& s, double a) { return -(a - s.y); };
  g.daa = [](const StateView&, double) { return -1.0; };
  g.kappa = 1.0;
  const auto r = lipschitz_probe(AmbiguityMap::fixed(kU), Driver(g), across, 100);
  EXPECT_EQ(r.tie_exclusions, 100u);
}
