#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "thetafbsde/bsde.hpp"
#include "thetafbsde/errors.hpp"
#include "thetafbsde/noise.hpp"
#include "thetafbsde/optimizer.hpp"
#include "thetafbsde/parallel.hpp"
#include "thetafbsde/problem.hpp"
#include "thetafbsde/sde.hpp"

namespace thetafbsde {

struct PicardOptions {
  std::size_t particles = 10000;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::size_t max_iter = 50;
  double beta = 1.0;
  double damping = 1.0;
  int degree = 3;
  bool fixed_point_correction = false;
  unsigned threads = 1;
};

/// Diagnostics of the fixed-point iteration. deltas[j] is the weighted-norm
/// change produced by iteration j + 1; ratios[j] = deltas[j + 1] / deltas[j].
struct PicardReport {
  std::size_t iterations = 0;
  std::vector<double> deltas;
  std::vector<double> ratios;
  double beta = 1.0;
  bool converged = false;
  std::size_t tie_events = 0;
};

class NonContractionError : public NumericalError {
public:
  NonContractionError(const std::string& what, PicardReport report)
      : NumericalError(what), report_(std::move(report)) {}
  const PicardReport& report() const noexcept { return report_; }

private:
  PicardReport report_;
};

class NoConvergenceError : public NumericalError {
public:
  NoConvergenceError(const std::string& what, PicardReport report)
      : NumericalError(what), report_(std::move(report)) {}
  const PicardReport& report() const noexcept { return report_; }

private:
  PicardReport report_;
};

struct PicardResult {
  SolutionPaths paths;
  PicardReport report;
};

/// Stage (a): controls from the current (X, Y, Z) and the laws stored in
/// `paths`. Returns the number of optimizer ties.
inline std::size_t assign_controls(const ProblemSpec& spec, const TimeGrid& grid,
                                   SolutionPaths& paths, unsigned threads = 1) {
  std::size_t ties = 0;
  std::vector<char> tie(paths.particles());
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    const EmpiricalMeasure& law = paths.law(i);
    const IntervalUnion set = spec.ambiguity.realize(law);
    const double t = grid.time(i);
    parallel_for(paths.particles(), threads, [&](std::size_t p) {
      const StateView s{t, paths.x(i, p), paths.y(i, p), paths.z(i, p), &law};
      const auto r = maximize_over(set, spec.driver, s);
      paths.a(i, p) = r.a_star;
      tie[p] = r.tie ? 1 : 0;
    });
    ties += static_cast<std::size_t>(std::count(tie.begin(), tie.end(), 1));
  }
  return ties;
}

/// Discrete ||(dX, dY, dZ)||_beta: sqrt of
///   max_i mean_p |dX|^2 + beta (max_i mean_p |dY|^2 + sum_i mean_p |dZ|^2 dt).
inline double weighted_norm(const SolutionPaths& a, const SolutionPaths& b, const TimeGrid& grid,
                            double beta) {
  const std::size_t n = a.particles();
  const auto k = static_cast<std::size_t>(a.k());
  const auto d = static_cast<std::size_t>(a.d());
  const auto& xa = a.x_data();
  const auto& xb = b.x_data();
  const auto& ya = a.y_data();
  const auto& yb = b.y_data();
  const auto& za = a.z_data();
  const auto& zb = b.z_data();
  double sx = 0.0, sy = 0.0, hz = 0.0;
  for (std::size_t i = 0; i < a.nodes(); ++i) {
    double mx = 0.0, my = 0.0, mz = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t base = i * n + p;
      for (std::size_t j = 0; j < k; ++j) {
        const double dx = xa[base * k + j] - xb[base * k + j];
        mx += dx * dx;
      }
      const double dy = ya[base] - yb[base];
      my += dy * dy;
      for (std::size_t j = 0; j < d; ++j) {
        const double dz = za[base * d + j] - zb[base * d + j];
        mz += dz * dz;
      }
    }
    sx = std::max(sx, mx / static_cast<double>(n));
    sy = std::max(sy, my / static_cast<double>(n));
    if (i + 1 < a.nodes())
      hz += mz / static_cast<double>(n) * grid.dt();
  }
  return std::sqrt(sx + beta * (sy + hz));
}

namespace detail {

struct InitialGuess {
  double control;
  double value;
};

// Control from the optimizer at (0, x0, Phi(x0), 0); the value is Phi of the
// noise-free Euler propagation of x0 under that frozen control.
inline InitialGuess initial_guess(const ProblemSpec& spec, const TimeGrid& grid) {
  std::vector<double> x(spec.x0.data(), spec.x0.data() + spec.k);
  const std::vector<double> z(static_cast<std::size_t>(spec.d), 0.0);
  const double phi0 = evaluate(spec.terminal, x);
  const EmpiricalMeasure law0 = EmpiricalMeasure::dirac(phi0);
  const StateView s{0.0, x, phi0, z, &law0};
  const double a = maximize_over(spec.ambiguity.realize(law0), spec.driver, s).a_star;
  std::vector<double> b(static_cast<std::size_t>(spec.k));
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    drift_at(spec, grid.time(i), x, a, law0, b);
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] += b[j] * grid.dt();
  }
  return {a, evaluate(spec.terminal, x)};
}

inline void relax(std::vector<double>& current, const std::vector<double>& old, double damping) {
  if (damping == 1.0)
    return;
  for (std::size_t i = 0; i < current.size(); ++i)
    current[i] = (1.0 - damping) * old[i] + damping * current[i];
}

} // namespace detail

/// Fixed-point iteration of the map Psi: (a) controls from the current triple
/// and its frozen laws, (b) backward sweep along the previous X, (c) forward
/// simulation with the fresh controls, reusing one noise stream throughout.
inline PicardResult picard_solve(const ProblemSpec& spec, const TimeGrid& grid,
                                 const PicardOptions& options) {
  spec.validate();
  if (!(options.tol > 0.0))
    throw ConfigError("Picard tolerance must be positive");
  if (options.max_iter < 1)
    throw ConfigError("Picard needs max_iter >= 1");
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw ConfigError("damping must lie in (0, 1]");
  if (options.particles < 1)
    throw ConfigError("at least one particle is required");

  const std::size_t n = options.particles;
  const NoiseIncrements noise(options.seed, grid.steps(), n, static_cast<std::size_t>(spec.d),
                              grid.dt());
  SolutionPaths paths(grid.nodes(), n, spec.k, spec.d);

  const auto guess = detail::initial_guess(spec, grid);
  std::fill(paths.a_data().begin(), paths.a_data().end(), guess.control);
  std::fill(paths.y_data().begin(), paths.y_data().end(), guess.value);
  std::fill(paths.z_data().begin(), paths.z_data().end(), 0.0);
  paths.refresh_laws();
  simulate_forward(spec, grid, noise, paths, options.threads);

  PicardReport report;
  report.beta = options.beta;
  const BackwardOptions backward{options.degree, options.fixed_point_correction, options.threads};
  std::size_t expanding = 0;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    const SolutionPaths previous = paths;
    paths.refresh_laws();
    report.tie_events += assign_controls(spec, grid, paths, options.threads);
    solve_backward(spec, grid, noise, paths, backward);
    simulate_forward(spec, grid, noise, paths, options.threads);
    detail::relax(paths.x_data(), previous.x_data(), options.damping);
    detail::relax(paths.y_data(), previous.y_data(), options.damping);
    detail::relax(paths.z_data(), previous.z_data(), options.damping);

    const double delta = weighted_norm(paths, previous, grid, options.beta);
    if (!std::isfinite(delta))
      throw DivergenceError("Picard iterate became non-finite", 0);
    report.iterations = it;
    if (!report.deltas.empty()) {
      const double ratio = report.deltas.back() > 0.0 ? delta / report.deltas.back() : 0.0;
      report.ratios.push_back(ratio);
      expanding = ratio >= 1.0 ? expanding + 1 : 0;
    }
    report.deltas.push_back(delta);
    if (delta < options.tol) {
      report.converged = true;
      break;
    }
    if (expanding >= 3) {
      std::ostringstream os;
      os << "Picard map is not contracting (3 consecutive ratios >= 1, last delta " << delta
         << "); shorten the horizon T or reduce the damping";
      throw NonContractionError(os.str(), report);
    }
  }
  paths.refresh_laws();
  if (!report.converged) {
    std::ostringstream os;
    os << "Picard iteration did not reach tol " << options.tol << " in " << options.max_iter
       << " iterations (last delta " << report.deltas.back() << ")";
    throw NoConvergenceError(os.str(), report);
  }
  return {std::move(paths), std::move(report)};
}

/// Decoupled solve with the control frozen at w: one forward simulation and
/// one backward sweep. Laws are the point mass used by picard_solve's
/// initialization, so coefficients should not depend on the law.
inline SolutionPaths solve_fixed_control(const ProblemSpec& spec, const TimeGrid& grid, double w,
                                         const PicardOptions& options) {
  spec.validate();
  const std::size_t n = options.particles;
  const NoiseIncrements noise(options.seed, grid.steps(), n, static_cast<std::size_t>(spec.d),
                              grid.dt());
  SolutionPaths paths(grid.nodes(), n, spec.k, spec.d);
  const auto guess = detail::initial_guess(spec, grid);
  std::fill(paths.a_data().begin(), paths.a_data().end(), w);
  std::fill(paths.y_data().begin(), paths.y_data().end(), guess.value);
  paths.refresh_laws();
  simulate_forward(spec, grid, noise, paths, options.threads);
  solve_backward(spec, grid, noise, paths,
                 {options.degree, options.fixed_point_correction, options.threads});
  paths.refresh_laws();
  return paths;
}

} // namespace thetafbsde
