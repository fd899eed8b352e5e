#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "thetafbsde/errors.hpp"
#include "thetafbsde/noise.hpp"
#include "thetafbsde/parallel.hpp"
#include "thetafbsde/problem.hpp"
#include "thetafbsde/regression.hpp"

namespace thetafbsde {

struct BackwardOptions {
  int degree = 3;
  /// One extra evaluation Y_i = C_i + F(.., Y_i, ..) dt after the explicit step.
  bool fixed_point_correction = false;
  unsigned threads = 1;
};

/// Least-squares Monte Carlo backward sweep over the stored X, A and laws.
///
///   Y_N = Phi(X_N)
///   C_i = E[Y_{i+1} | X_i],  Z_i = E[(Y_{i+1} - C_i) dB_i | X_i] / dt
///   Y_i = C_i + F(t_i, X_i, C_i, Z_i, A_i, mu_i) dt
///
/// Z at the last node repeats node N-1.
inline void solve_backward(const ProblemSpec& spec, const TimeGrid& grid,
                           const NoiseIncrements& noise, SolutionPaths& paths,
                           const BackwardOptions& options = {}) {
  const std::size_t n = paths.particles();
  const std::size_t last = grid.steps();
  const auto k = static_cast<std::size_t>(spec.k);
  const auto d = static_cast<std::size_t>(spec.d);
  const double dt = grid.dt();

  for (std::size_t p = 0; p < n; ++p) {
    paths.y(last, p) = evaluate(spec.terminal, paths.x(last, p));
    if (!std::isfinite(paths.y(last, p)))
      throw DivergenceError("terminal value is not finite", last);
  }
  std::vector<double> pathwise(paths.y_node(last).begin(), paths.y_node(last).end());

  Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), 1);
  Eigen::MatrixXd z_targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t step = last; step-- > 0;) {
    const std::size_t i = step;
    for (std::size_t p = 0; p < n; ++p)
      targets(static_cast<Eigen::Index>(p), 0) = paths.y(i + 1, p);
    const auto fit = PolynomialRegression::fit(paths.x_node(i), k, targets, options.degree);
    const Eigen::MatrixXd& fitted = fit.fitted();
    // Centering by C_i leaves E[Y_{i+1} dB_i | X_i] unchanged and removes
    // most of its O(1/dt) variance.
    for (std::size_t p = 0; p < n; ++p) {
      const auto row = static_cast<Eigen::Index>(p);
      const double centered = targets(row, 0) - fitted(row, 0);
      const double* db = noise.at(i, p);
      for (std::size_t j = 0; j < d; ++j)
        z_targets(row, static_cast<Eigen::Index>(j)) = centered * db[j] / dt;
    }
    const Eigen::MatrixXd z_fitted = fit.project(z_targets);

    const double t = grid.time(i);
    const EmpiricalMeasure& law = paths.law(i);
    std::vector<char> ok(n, 1);
    parallel_for(n, options.threads, [&](std::size_t p) {
      const auto row = static_cast<Eigen::Index>(p);
      auto z = paths.z(i, p);
      for (std::size_t j = 0; j < d; ++j)
        z[j] = z_fitted(row, static_cast<Eigen::Index>(j));
      const double c = fitted(row, 0);
      StateView s{t, paths.x(i, p), c, paths.z(i, p), &law};
      double y = c + spec.driver.value(s, paths.a(i, p)) * dt;
      if (options.fixed_point_correction) {
        s.y = y;
        y = c + spec.driver.value(s, paths.a(i, p)) * dt;
      }
      paths.y(i, p) = y;
      if (!std::isfinite(y))
        ok[p] = 0;
    });
    for (char c : ok)
      if (!c)
        throw DivergenceError("backward value became non-finite", i);

    for (std::size_t p = 0; p < n; ++p)
      pathwise[p] += paths.y(i, p) - fitted(static_cast<Eigen::Index>(p), 0);
  }
  // Every fit has an intercept, so Y_0 is the sample mean of the pathwise
  // values Phi(X_N) + sum_i F_i dt; their spread gives its standard error.
  double mean = 0.0;
  for (double v : pathwise)
    mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : pathwise)
    var += (v - mean) * (v - mean);
  paths.y0_standard_error =
      n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;

  for (std::size_t p = 0; p < n; ++p) {
    auto zl = paths.z(last, p);
    const auto zp = paths.z(last - 1, p);
    for (std::size_t j = 0; j < d; ++j)
      zl[j] = zp[j];
  }
}

/// Classical RK4 for y' = -G(t, y) integrated backward from y(T) = xi.
/// Entry i of the result is y(i T / n_steps).
inline std::vector<double> solve_deterministic_ode(const std::function<double(double, double)>& g,
                                                   double xi, double horizon, std::size_t n_steps) {
  if (n_steps == 0 || !(horizon > 0.0))
    throw ConfigError("ODE solve needs a positive horizon and at least one step");
  const double h = horizon / static_cast<double>(n_steps);
  std::vector<double> y(n_steps + 1);
  y[n_steps] = xi;
  for (std::size_t i = n_steps; i-- > 0;) {
    const double t1 = i + 1 == n_steps ? horizon : static_cast<double>(i + 1) * h;
    const double tm = t1 - 0.5 * h;
    const double t0 = static_cast<double>(i) * h;
    const double yv = y[i + 1];
    const double k1 = g(t1, yv);
    const double k2 = g(tm, yv + 0.5 * h * k1);
    const double k3 = g(tm, yv + 0.5 * h * k2);
    const double k4 = g(t0, yv + h * k3);
    y[i] = yv + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(y[i]))
      throw DivergenceError("ODE solution became non-finite", i);
  }
  return y;
}

} // namespace thetafbsde
