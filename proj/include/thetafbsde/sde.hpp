#pragma once

#include <cmath>
#include <vector>

#include "thetafbsde/errors.hpp"
#include "thetafbsde/noise.hpp"
#include "thetafbsde/parallel.hpp"
#include "thetafbsde/problem.hpp"

namespace thetafbsde {

/// Euler-Maruyama particle simulation of the forward equation, using the
/// controls and laws stored in `paths` and writing its X arrays.
///
/// X_{i+1} = X_i + b(t_i, X_i, A_i, mu_i) dt + sigma(t_i, X_i, A_i, mu_i) dB_i
inline void simulate_forward(const ProblemSpec& spec, const TimeGrid& grid,
                             const NoiseIncrements& noise, SolutionPaths& paths,
                             unsigned threads = 1) {
  const std::size_t n_particles = paths.particles();
  const auto k = static_cast<std::size_t>(spec.k);
  const auto d = static_cast<std::size_t>(spec.d);
  if (noise.steps() != grid.steps() || noise.particles() != n_particles || noise.dim() != d)
    throw UsageError("noise increments do not match the grid and particle count");

  for (std::size_t p = 0; p < n_particles; ++p) {
    auto x = paths.x(0, p);
    for (std::size_t j = 0; j < k; ++j)
      x[j] = spec.x0[static_cast<Eigen::Index>(j)];
  }

  const double dt = grid.dt();
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    const double t = grid.time(i);
    const EmpiricalMeasure& law = paths.law(i);
    bool finite = true;
    std::vector<char> ok(n_particles, 1);
    parallel_for(n_particles, threads, [&](std::size_t p) {
      thread_local std::vector<double> drift, vol;
      drift.resize(k);
      vol.resize(k * d);
      const auto xi = paths.x(i, p);
      auto xn = paths.x(i + 1, p);
      const double a = paths.a(i, p);
      drift_at(spec, t, xi, a, law, drift);
      volatility_at(spec, t, xi, a, law, vol);
      const double* db = noise.at(i, p);
      for (std::size_t r = 0; r < k; ++r) {
        double v = xi[r] + drift[r] * dt;
        for (std::size_t c = 0; c < d; ++c)
          v += vol[r * d + c] * db[c];
        xn[r] = v;
        if (!std::isfinite(v))
          ok[p] = 0;
      }
    });
    for (char c : ok)
      finite = finite && c;
    if (!finite)
      throw DivergenceError("forward state became non-finite", i + 1);
  }
}

} // namespace thetafbsde
