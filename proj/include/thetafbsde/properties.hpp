#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thetafbsde/bsde.hpp"
#include "thetafbsde/coupling.hpp"
#include "thetafbsde/optimizer.hpp"
#include "thetafbsde/problem.hpp"
#include "thetafbsde/regression.hpp"

namespace thetafbsde {

/// The system with no forward state and no noise: y' = -G(t, y), y(T) = xi,
/// where G(t, y) = sup over U_{g(delta_y)} of F(t, ., y, 0, a, delta_y).
/// Without an ambiguity map the quartic driver is maximized over the line.
struct DeterministicProblem {
  Driver driver = Driver::quartic(2.0, 1.0);
  std::optional<AmbiguityMap> ambiguity;
  double horizon = 1.0;
  std::size_t steps = 1000;

  static DeterministicProblem quartic(double lambda, double gamma, double horizon,
                                      std::size_t steps) {
    return {Driver::quartic(lambda, gamma), std::nullopt, horizon, steps};
  }

  double G(double t, double y) const {
    if (!ambiguity)
      return quartic_G(driver, y);
    const EmpiricalMeasure law = EmpiricalMeasure::dirac(y);
    const StateView s{t, {}, y, {}, &law};
    return driver_G(ambiguity->realize(law), driver, s);
  }

  /// y on n uniform steps over [t0, t1], terminal value xi at t1.
  std::vector<double> path(double xi, double t0, double t1, std::size_t n) const {
    return solve_deterministic_ode([this, t0](double t, double y) { return G(t0 + t, y); }, xi,
                                   t1 - t0, n);
  }

  std::vector<double> path(double xi) const { return path(xi, 0.0, horizon, steps); }
};

// ---------------------------------------------------------------------------
// The operator E[xi] = Y_0

struct ThetaValue {
  double y0 = 0.0;
  double standard_error = 0.0;
};

inline ThetaValue theta_expectation(const DeterministicProblem& problem, double xi) {
  return {problem.path(xi).front(), 0.0};
}

struct StochasticThetaValue {
  double y0 = 0.0;
  double standard_error = 0.0;
  PicardResult solution;
};

inline StochasticThetaValue theta_expectation(ProblemSpec spec, const TimeGrid& grid,
                                              const PicardOptions& options,
                                              const Terminal& xi) {
  spec.terminal = xi;
  auto solution = picard_solve(spec, grid, options);
  const double y0 = solution.paths.y0();
  const double se = solution.paths.y0_standard_error;
  return {y0, se, std::move(solution)};
}

// ---------------------------------------------------------------------------
// Checkers

/// |E[E[xi | F_t]] - E[xi]| by solving on [t, T] and then on [0, t].
inline double check_dynamic_consistency(const DeterministicProblem& problem, double xi,
                                        double t_split) {
  if (!(t_split > 0.0 && t_split < problem.horizon))
    throw UsageError("split time must lie strictly inside (0, T)");
  const double h = problem.horizon / static_cast<double>(problem.steps);
  const auto tail_steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround((problem.horizon - t_split) / h)));
  const auto head_steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t_split / h)));
  const double direct = problem.path(xi).front();
  const double at_split = problem.path(xi, t_split, problem.horizon, tail_steps).front();
  const double nested = problem.path(at_split, 0.0, t_split, head_steps).front();
  return std::abs(nested - direct);
}

struct StochasticConsistency {
  double direct = 0.0;
  double nested = 0.0;
  double discrepancy = 0.0;
  double tolerance = 0.0; // 3 combined standard errors
  bool pass = false;
};

/// Stochastic tower check: the node-m values of the full solve, regressed on
/// X_m, become the terminal function of a solve on [0, t_m].
inline StochasticConsistency check_dynamic_consistency(const ProblemSpec& spec,
                                                       const TimeGrid& grid,
                                                       const PicardOptions& options,
                                                       std::size_t split_node) {
  if (split_node == 0 || split_node >= grid.steps())
    throw UsageError("split node must lie strictly inside the grid");
  const auto full = picard_solve(spec, grid, options);
  const auto& paths = full.paths;
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(paths.particles()), 1);
  for (std::size_t p = 0; p < paths.particles(); ++p)
    targets(static_cast<Eigen::Index>(p), 0) = paths.y(split_node, p);
  auto fit = std::make_shared<PolynomialRegression>(
      PolynomialRegression::fit(paths.x_node(split_node), static_cast<std::size_t>(spec.k),
                                targets, options.degree));

  ProblemSpec head = spec;
  head.horizon = grid.time(split_node);
  head.terminal = GenericTerminal{[fit](std::span<const double> x) { return fit->predict(x); }};
  const auto nested = picard_solve(head, TimeGrid(head.horizon, split_node), options);

  StochasticConsistency out;
  out.direct = paths.y0();
  out.nested = nested.paths.y0();
  out.discrepancy = std::abs(out.nested - out.direct);
  out.tolerance = 3.0 * std::hypot(paths.y0_standard_error, nested.paths.y0_standard_error);
  out.pass = out.discrepancy <= out.tolerance;
  return out;
}

struct MonotonicityCheck {
  double y1 = 0.0;
  double y2 = 0.0;
  double margin = 0.0; // y1 - y2
  double tolerance = 0.0;
  bool pass = false;
};

inline MonotonicityCheck check_monotonicity(const DeterministicProblem& problem, double xi1,
                                            double xi2) {
  if (xi1 < xi2)
    throw UsageError("monotonicity check needs xi1 >= xi2");
  MonotonicityCheck out;
  out.y1 = theta_expectation(problem, xi1).y0;
  out.y2 = theta_expectation(problem, xi2).y0;
  out.margin = out.y1 - out.y2;
  out.pass = out.margin >= 0.0;
  return out;
}

/// Phi1 >= Phi2 is verified at every simulated terminal state of both runs.
inline MonotonicityCheck check_monotonicity(const ProblemSpec& spec, const TimeGrid& grid,
                                            const PicardOptions& options, const Terminal& phi1,
                                            const Terminal& phi2) {
  const auto r1 = theta_expectation(spec, grid, options, phi1);
  const auto r2 = theta_expectation(spec, grid, options, phi2);
  for (const auto* run : {&r1, &r2}) {
    const auto& paths = run->solution.paths;
    for (std::size_t p = 0; p < paths.particles(); ++p) {
      const auto x = paths.x(grid.steps(), p);
      if (evaluate(phi1, x) < evaluate(phi2, x))
        throw UsageError("terminal functions are not ordered at a simulated state");
    }
  }
  MonotonicityCheck out;
  out.y1 = r1.y0;
  out.y2 = r2.y0;
  out.margin = r1.y0 - r2.y0;
  out.tolerance = 3.0 * std::hypot(r1.standard_error, r2.standard_error);
  out.pass = out.margin >= -out.tolerance;
  return out;
}

struct SubadditivityCheck {
  double e_zero = 0.0;    // E[c + (-c)]
  double e_plus = 0.0;    // E[c]
  double e_minus = 0.0;   // E[-c]
  double split_sum = 0.0; // E[c] + E[-c]
  double gap = 0.0;       // split_sum - e_zero
};

/// Keeps |y| <= 0.5 along both paths, where G is convex for the quartic family.
inline constexpr double convexity_guard = 0.5;

inline SubadditivityCheck check_subadditivity(const DeterministicProblem& problem, double c) {
  if (!problem.driver.as<QuarticCounterexample>())
    throw UsageError("sub-additivity check is defined for the quartic driver family");
  const auto plus = problem.path(c);
  const auto minus = problem.path(-c);
  auto peak = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double y : v)
      m = std::max(m, std::abs(y));
    return m;
  };
  if (peak(plus) > convexity_guard || peak(minus) > convexity_guard)
    throw ParameterError("path leaves |y| <= 0.5 where G is known to be convex; use a smaller c");
  SubadditivityCheck out;
  out.e_zero = problem.path(0.0).front();
  out.e_plus = plus.front();
  out.e_minus = minus.front();
  out.split_sum = out.e_plus + out.e_minus;
  out.gap = out.split_sum - out.e_zero;
  return out;
}

/// E[xi + c] - (E[xi] + c).
inline double check_translation_invariance(const DeterministicProblem& problem, double xi,
                                           double c) {
  return theta_expectation(problem, xi + c).y0 - (theta_expectation(problem, xi).y0 + c);
}

struct StochasticTranslation {
  double defect = 0.0;
  double tolerance = 0.0;
};

inline StochasticTranslation check_translation_invariance(const ProblemSpec& spec,
                                                          const TimeGrid& grid,
                                                          const PicardOptions& options,
                                                          const Terminal& xi, double c) {
  const auto base = theta_expectation(spec, grid, options, xi);
  const auto moved = theta_expectation(spec, grid, options, shifted(xi, c));
  return {moved.y0 - (base.y0 + c), 3.0 * std::hypot(base.standard_error, moved.standard_error)};
}

// ---------------------------------------------------------------------------

struct MartingaleDiagnostics {
  double max_abs_driver = 0.0;
  /// z-score of the mean increment of M_i = Y_i + sum_{j<i} F_j dt, per step.
  std::vector<double> z_scores;
  double fraction_within_3 = 1.0;
};

inline MartingaleDiagnostics martingale_diagnostics(const ProblemSpec& spec, const TimeGrid& grid,
                                                    const SolutionPaths& paths) {
  MartingaleDiagnostics out;
  const std::size_t n = paths.particles();
  const double dt = grid.dt();
  std::vector<double> inc(n);
  std::size_t within = 0;
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    const EmpiricalMeasure& law = paths.law(i);
    const double t = grid.time(i);
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const StateView s{t, paths.x(i, p), paths.y(i, p), paths.z(i, p), &law};
      const double f = spec.driver.value(s, paths.a(i, p));
      out.max_abs_driver = std::max(out.max_abs_driver, std::abs(f));
      inc[p] = paths.y(i + 1, p) - paths.y(i, p) + f * dt;
      mean += inc[p];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : inc)
      var += (v - mean) * (v - mean);
    const double se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    double z = 0.0;
    if (se > 0.0)
      z = mean / se;
    else if (std::abs(mean) > 1e-14)
      z = std::copysign(std::numeric_limits<double>::infinity(), mean);
    out.z_scores.push_back(z);
    if (std::abs(z) <= 3.0)
      ++within;
  }
  out.fraction_within_3 =
      grid.steps() ? static_cast<double>(within) / static_cast<double>(grid.steps()) : 1.0;
  return out;
}

struct DeterministicMartingale {
  double max_abs_driver = 0.0;
  /// max over t of |M_t - M_0| with M_t = y(t) + int_0^t G(y(s)) ds.
  double max_deviation = 0.0;
};

/// The integral of G is taken by composite Simpson over pairs of steps
/// (trapezoid on a trailing odd step), independently of the RK4 stages.
inline DeterministicMartingale martingale_diagnostics(const DeterministicProblem& problem,
                                                      const std::vector<double>& path) {
  DeterministicMartingale out;
  const std::size_t n = path.size() - 1;
  const double h = problem.horizon / static_cast<double>(n);
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    g[i] = problem.G(static_cast<double>(i) * h, path[i]);
    out.max_abs_driver = std::max(out.max_abs_driver, std::abs(g[i]));
  }
  double integral = 0.0;
  const double m0 = path[0];
  for (std::size_t i = 0; i + 2 <= n; i += 2) {
    const double mid = path[i + 1] + integral + h / 12.0 * (5.0 * g[i] + 8.0 * g[i + 1] - g[i + 2]);
    out.max_deviation = std::max(out.max_deviation, std::abs(mid - m0));
    integral += h / 3.0 * (g[i] + 4.0 * g[i + 1] + g[i + 2]);
    out.max_deviation = std::max(out.max_deviation, std::abs(path[i + 2] + integral - m0));
  }
  if (n % 2 == 1) {
    integral += 0.5 * h * (g[n - 1] + g[n]);
    out.max_deviation = std::max(out.max_deviation, std::abs(path[n] + integral - m0));
  }
  return out;
}

} // namespace thetafbsde
