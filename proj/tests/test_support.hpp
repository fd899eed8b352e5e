#pragma once

#include <cmath>
#include <vector>

#include "thetafbsde.hpp"

namespace testing_support {

using namespace thetafbsde;

inline Eigen::VectorXd vec(double v) { return Eigen::VectorXd::Constant(1, v); }
inline Eigen::MatrixXd mat(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

/// One-dimensional spec: b = c0 - (1 + 3a) c1 x, constant sigma.
inline ProblemSpec scalar_spec(double c0, double c1, double sigma, double x0, double horizon,
                               Driver driver, Terminal terminal, AmbiguityMap sets) {
  ProblemSpec s;
  s.k = 1;
  s.d = 1;
  s.horizon = horizon;
  s.x0 = vec(x0);
  s.drift = ControlAffineDrift{vec(c0), mat(c1)};
  s.volatility = ConstantVolatility{mat(sigma)};
  s.driver = std::move(driver);
  s.terminal = std::move(terminal);
  s.ambiguity = std::move(sets);
  return s;
}

inline Terminal identity_terminal() { return LinearTerminal{vec(1.0), 0.0}; }

/// Brownian motion with F = 0: b = 0, control pinned at w0 = 0 in [-1, 1].
inline ProblemSpec martingale_spec(double sigma, double x0, double horizon, Terminal phi) {
  return scalar_spec(0.0, 0.0, sigma, x0, horizon, Driver::zero(0.0), std::move(phi),
                     AmbiguityMap::fixed(IntervalUnion(-1.0, 1.0)));
}

/// With W = 1 the drift is -x and G(y) = 0.5 y - 0.08, so
/// Y_0 = e^{-0.5} - 0.16 (e^{0.5} - 1).
inline double application_y0_oracle() { return std::exp(-0.5) - 0.16 * (std::exp(0.5) - 1.0); }

/// Same, on a general horizon T: Y_0 = e^{0.5T} x0 e^{-T} - 0.16 (e^{0.5T} - 1).
inline double application_y0_oracle(double horizon) {
  return std::exp(0.5 * horizon) * std::exp(-horizon) - 0.16 * (std::exp(0.5 * horizon) - 1.0);
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return s / static_cast<double>(v.size());
}

inline double standard_error(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Mean-field variant of the application: theta = alpha mean(Y), all
/// endpoints move by theta.
inline AmbiguityMap mean_field_sets(double alpha) {
  return AmbiguityMap(IntervalUnion({{-2.0, -1.0}, {1.0, 2.0}}), AffineMomentTheta{alpha, 0.0},
                      {{1.0, 1.0}, {1.0, 1.0}}, -0.4, 0.4);
}

} // namespace testing_support
