#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace thetafbsde;
using namespace testing_support;

namespace {

const MeasureFlow kNoLaw = MeasureFlow::constant(EmpiricalMeasure::dirac(0.0));

PicardOptions options(std::size_t particles) {
  PicardOptions o;
  o.particles = particles;
  return o;
}

} // namespace

TEST(Grid1D, Validation) {
  EXPECT_THROW((Grid1D{1.0, 0.0, 11, 10, 1.0}).validate(), GridError);
  EXPECT_THROW((Grid1D{0.0, 1.0, 2, 10, 1.0}).validate(), GridError);
  EXPECT_NO_THROW((Grid1D{0.0, 1.0, 11, 10, 1.0}).validate());
}

TEST(SolveHjb, LinearTerminalInvariant) {
  const auto spec = martingale_spec(1.0, 0.0, 1.0, identity_terminal());
  const auto g = cfl_grid(spec, -3.0, 3.0, 61);
  const auto v = solve_hjb(spec, g, kNoLaw);
  for (std::size_t n = 0; n <= g.nt; ++n)
    for (std::size_t j = 0; j < g.nx; ++j)
      ASSERT_NEAR(v.at(n, j), g.x(j), 1e-8);
}

TEST(SolveHjb, ConstantTerminalExact) {
  const auto spec = martingale_spec(1.0, 0.0, 1.0, ConstantTerminal{2.5});
  const auto g = cfl_grid(spec, -3.0, 3.0, 41);
  const auto v = solve_hjb(spec, g, kNoLaw);
  for (double x : v.values)
    ASSERT_EQ(x, 2.5);
}

TEST(SolveHjb, CflViolationRaisesGridError) {
  const auto spec = martingale_spec(1.0, 0.0, 1.0, identity_terminal());
  EXPECT_THROW(solve_hjb(spec, Grid1D{-3.0, 3.0, 61, 1, 1.0}, kNoLaw), GridError);
}

TEST(SolveHjb, RejectsMultidimensional) {
  auto spec = martingale_spec(1.0, 0.0, 1.0, identity_terminal());
  spec.k = 2;
  EXPECT_THROW(default_grid(spec), UsageError);
}

TEST(SolveHjb, ApplicationValue) {
  const ApplicationConfig app;
  const auto spec = app.spec();
  const auto v = solve_hjb(spec, default_grid(spec), kNoLaw);
  const double oracle = application_y0_oracle();
  EXPECT_NEAR(oracle, 0.5027, 1e-4);
  EXPECT_LE(std::abs(v.interpolate(0, 1.0) - oracle) / oracle, 0.02);
}

TEST(SolveHjb, JointSupMode) {
  const ApplicationConfig app;
  const auto spec = app.spec();
  const auto v = solve_hjb(spec, default_grid(spec), kNoLaw, HamiltonianMode::joint_sup);
  const double joint = v.interpolate(0, 1.0);
  EXPECT_TRUE(std::isfinite(joint));
  // The joint supremum dominates the argmax generator.
  const auto w = solve_hjb(spec, default_grid(spec), kNoLaw);
  EXPECT_GE(joint, w.interpolate(0, 1.0) - 1e-12);

  auto generic = spec;
  generic.drift = GenericDrift{[](double, std::span<const double>, double, const EmpiricalMeasure&,
                                  std::span<double> out) { out[0] = 0.0; }};
  EXPECT_THROW(solve_hjb(generic, default_grid(spec), kNoLaw, HamiltonianMode::joint_sup), UsageError);
}

TEST(SolveHjb, DiscreteComparison) {
  const ApplicationConfig app;
  auto low = app.spec();
  auto high = low;
  high.terminal = GenericTerminal{[](std::span<const double> x) { return x[0] + 0.5 * std::exp(-x[0] * x[0]); }};
  const auto g = default_grid(low);
  const auto v1 = solve_hjb(low, g, kNoLaw);
  const auto v2 = solve_hjb(high, g, kNoLaw);
  for (std::size_t i = 0; i < v1.values.size(); ++i)
    ASSERT_GE(v2.values[i], v1.values[i] - 1e-14);
}

TEST(SolveHjb, ManufacturedQuadraticHeat) {
  // v = x^2 + sigma^2 (T - t) solves -v_t = sigma^2/2 v_xx exactly; centred
  // differences are exact on quadratics away from the truncated boundary.
  const double sigma = 0.5;
  const auto spec = martingale_spec(sigma, 0.0, 1.0, QuadraticTerminal{mat(1.0), vec(0.0), 0.0});
  const auto g = cfl_grid(spec, -4.0, 4.0, 81);
  const auto v = solve_hjb(spec, g, kNoLaw);
  EXPECT_NEAR(v.interpolate(0, 0.0), sigma * sigma, 1e-8);
}

TEST(SolveHjb, ManufacturedDriftRefinement) {
  // b = c0, sigma: v = (x + c0 (T - t))^2 + sigma^2 (T - t).
  const double c0 = 0.5, sigma = 0.5;
  const auto spec = scalar_spec(c0, 0.0, sigma, 0.0, 1.0, Driver::zero(0.0),
                                QuadraticTerminal{mat(1.0), vec(0.0), 0.0},
                                AmbiguityMap::fixed(IntervalUnion(-1.0, 1.0)));
  const double exact = c0 * c0 + sigma * sigma;
  std::vector<double> err;
  for (std::size_t nx : {41u, 81u, 161u}) {
    const auto v = solve_hjb(spec, cfl_grid(spec, -4.0, 4.0, nx), kNoLaw);
    err.push_back(std::abs(v.interpolate(0, 0.0) - exact));
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
  EXPECT_GT(err[0] / err[1], 1.5);
}

TEST(FeynmanKac, ApplicationGap) {
  const ApplicationConfig app;
  const auto spec = app.spec();
  const TimeGrid tg(1.0, 50);
  const auto r = picard_solve(spec, tg, options(5000));
  const auto gap = feynman_kac_check(spec, default_grid(spec), r.paths, tg);
  EXPECT_LE(gap.rel_gap, 0.05);
  EXPECT_DOUBLE_EQ(gap.fbsde_value, r.paths.y0());
}

TEST(FeynmanKac, ZeroDriverWithinStandardError) {
  const auto spec = martingale_spec(1.0, 0.4, 1.0, identity_terminal());
  const TimeGrid tg(1.0, 30);
  const auto r = picard_solve(spec, tg, options(4000));
  const auto gap = feynman_kac_check(spec, default_grid(spec), r.paths, tg);
  EXPECT_NEAR(gap.pde_value, 0.4, 1e-8);
  EXPECT_LE(gap.abs_gap, 3.0 * r.paths.y0_standard_error + 1e-3);
}

TEST(FeynmanKac, RefinementDoesNotWorsen) {
  const ApplicationConfig app;
  const auto spec = app.spec();
  const TimeGrid tg(1.0, 50);
  const auto r = picard_solve(spec, tg, options(4000));
  const auto coarse = default_grid(spec, 121);
  const auto fine = default_grid(spec, 241);
  const double a = feynman_kac_check(spec, coarse, r.paths, tg).abs_gap;
  const double b = feynman_kac_check(spec, fine, r.paths, tg).abs_gap;
  EXPECT_LE(b, a + 3.0 * r.paths.y0_standard_error);
}
