#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "thetafbsde/errors.hpp"
#include "thetafbsde/optimizer.hpp"
#include "thetafbsde/problem.hpp"

namespace thetafbsde {

/// Uniform space-time grid for the one-dimensional HJB solve.
struct Grid1D {
  double x_min = -1.0;
  double x_max = 1.0;
  std::size_t nx = 101;
  std::size_t nt = 100;
  double horizon = 1.0;

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double dt() const noexcept { return horizon / static_cast<double>(nt); }
  double x(std::size_t j) const noexcept {
    return j + 1 == nx ? x_max : x_min + static_cast<double>(j) * dx();
  }
  double t(std::size_t n) const noexcept {
    return n == nt ? horizon : static_cast<double>(n) * dt();
  }

  void validate() const {
    if (!(x_min < x_max))
      throw GridError("grid needs x_min < x_max");
    if (nx < 3 || nt < 1)
      throw GridError("grid needs nx >= 3 and nt >= 1");
    if (!(horizon > 0.0))
      throw GridError("grid horizon must be positive");
  }
};

/// Value surface v(t_n, x_j), stored layer by layer.
struct ValueSurface {
  Grid1D grid;
  std::vector<double> values;

  double at(std::size_t n, std::size_t j) const { return values[n * grid.nx + j]; }

  /// Linear interpolation in x on layer n; clamps outside the domain.
  double interpolate(std::size_t n, double x) const {
    const double s = std::clamp((x - grid.x_min) / grid.dx(), 0.0, static_cast<double>(grid.nx - 1));
    const auto j = std::min(static_cast<std::size_t>(s), grid.nx - 2);
    const double w = s - static_cast<double>(j);
    return (1.0 - w) * at(n, j) + w * at(n, j + 1);
  }
};

/// Flow of laws t -> mu_t, either constant or read off a particle solution.
class MeasureFlow {
public:
  static MeasureFlow constant(EmpiricalMeasure law) {
    MeasureFlow f;
    f.laws_.push_back(std::move(law));
    f.dt_ = 0.0;
    return f;
  }

  static MeasureFlow from_solution(const SolutionPaths& paths, const TimeGrid& grid) {
    MeasureFlow f;
    f.laws_ = paths.laws();
    f.dt_ = grid.dt();
    return f;
  }

  /// Law at the last solution node not after t.
  const EmpiricalMeasure& at(double t) const {
    if (laws_.size() == 1 || dt_ == 0.0)
      return laws_.front();
    const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(t / dt_ + 1e-9)));
    return laws_[std::min(i, laws_.size() - 1)];
  }

private:
  std::vector<EmpiricalMeasure> laws_;
  double dt_ = 0.0;
};

enum class HamiltonianMode {
  /// Control from the pointwise optimality condition (argmax of F over the
  /// realized set), then plugged into the generator. Matches the FBSDE.
  driver_argmax,
  /// sup over a of b(a) v_x + sigma^2/2 v_xx + F(a). Needs a control-affine
  /// drift and constant volatility.
  joint_sup,
};

namespace detail {

inline double drift_bound(const ProblemSpec& spec, double x_lo, double x_hi) {
  const auto k_range = spec.ambiguity.global_range();
  if (const auto* b = std::get_if<ControlAffineDrift>(&spec.drift)) {
    const double m = std::max(std::abs(1.0 + 3.0 * k_range.lo), std::abs(1.0 + 3.0 * k_range.hi));
    return std::abs(b->c0[0]) + std::abs(b->c1(0, 0)) * m * std::max(std::abs(x_lo), std::abs(x_hi));
  }
  // Generic drift: sample the box.
  double bound = 0.0;
  const EmpiricalMeasure law;
  double out = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / 20.0;
    for (double a : {k_range.lo, 0.5 * (k_range.lo + k_range.hi), k_range.hi}) {
      drift_at(spec, 0.0, std::span<const double>(&x, 1), a, law, std::span<double>(&out, 1));
      bound = std::max(bound, std::abs(out));
    }
  }
  return 1.5 * bound;
}

inline double sigma_bound(const ProblemSpec& spec) {
  if (const auto* s = std::get_if<ConstantVolatility>(&spec.volatility))
    return std::abs(s->sigma(0, 0));
  const auto k_range = spec.ambiguity.global_range();
  double bound = 0.0;
  const EmpiricalMeasure law;
  double out = 0.0;
  const double x = spec.x0[0];
  for (double a : {k_range.lo, k_range.hi}) {
    volatility_at(spec, 0.0, std::span<const double>(&x, 1), a, law, std::span<double>(&out, 1));
    bound = std::max(bound, std::abs(out));
  }
  return 1.5 * bound;
}

} // namespace detail

/// Grid on [x_min, x_max] with the fewest time steps keeping the explicit
/// scheme within 90% of its CFL limits.
inline Grid1D cfl_grid(const ProblemSpec& spec, double x_min, double x_max, std::size_t nx) {
  Grid1D g{x_min, x_max, nx, 1, spec.horizon};
  g.validate();
  const double sigma = detail::sigma_bound(spec);
  const double dx = g.dx();
  // sigma^2 dt / dx^2 <= 0.5 and (sigma^2 / dx^2 + |b| / dx) dt <= 1.
  const double diffusion = sigma * sigma / (dx * dx);
  const double rate = std::max(2.0 * diffusion, diffusion + detail::drift_bound(spec, x_min, x_max) / dx);
  const double dt_max = rate > 0.0 ? 0.9 / rate : spec.horizon;
  g.nt = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.horizon / dt_max)));
  return g;
}

/// Domain x0 +- 6 sigma sqrt(T), widened to hold the stationary means of the
/// control-affine drift, with nt picked so the explicit scheme is monotone.
inline Grid1D default_grid(const ProblemSpec& spec, std::size_t nx = 241) {
  if (spec.k != 1 || spec.d != 1)
    throw UsageError("the HJB solver is one-dimensional (k = d = 1)");
  const double sigma = detail::sigma_bound(spec);
  const double x0 = spec.x0[0];
  double lo = x0 - 6.0 * sigma * std::sqrt(spec.horizon);
  double hi = x0 + 6.0 * sigma * std::sqrt(spec.horizon);
  if (const auto* b = std::get_if<ControlAffineDrift>(&spec.drift)) {
    const auto r = spec.ambiguity.global_range();
    for (double w : {r.lo, r.hi}) {
      const double rate = b->c1(0, 0) * (1.0 + 3.0 * w);
      if (rate > 0.0) {
        const double m = b->c0[0] / rate;
        lo = std::min(lo, m - 0.5);
        hi = std::max(hi, m + 0.5);
      }
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  return cfl_grid(spec, lo, hi, nx);
}

/// Explicit monotone scheme for -v_t = sup_a {b v_x + sigma^2/2 v_xx + F},
/// v(T) = Phi. Upwind first derivative by the sign of b at the control,
/// centred second derivative, v_xx = 0 at both ends.
inline ValueSurface solve_hjb(const ProblemSpec& spec, const Grid1D& grid, const MeasureFlow& flow,
                              HamiltonianMode mode = HamiltonianMode::driver_argmax) {
  spec.validate();
  grid.validate();
  if (spec.k != 1 || spec.d != 1)
    throw UsageError("the HJB solver is one-dimensional (k = d = 1)");
  if (mode == HamiltonianMode::joint_sup &&
      (!std::holds_alternative<ControlAffineDrift>(spec.drift) ||
       !std::holds_alternative<ConstantVolatility>(spec.volatility)))
    throw UsageError("joint_sup mode needs a control-affine drift and constant volatility");

  const std::size_t nx = grid.nx;
  const double dx = grid.dx();
  const double dt = grid.dt();
  ValueSurface surface{grid, std::vector<double>((grid.nt + 1) * nx)};
  for (std::size_t j = 0; j < nx; ++j) {
    const double x = grid.x(j);
    surface.values[grid.nt * nx + j] = evaluate(spec.terminal, std::span<const double>(&x, 1));
  }

  std::vector<double> control(nx, 0.5 * (spec.ambiguity.global_range().lo + spec.ambiguity.global_range().hi));
  for (std::size_t n = grid.nt; n-- > 0;) {
    const double t = grid.t(n + 1);
    const EmpiricalMeasure& law = flow.at(t);
    const IntervalUnion set = spec.ambiguity.realize(law);
    const double* v = surface.values.data() + (n + 1) * nx;
    double* out = surface.values.data() + n * nx;

    for (std::size_t j = 0; j < nx; ++j) {
      const double x = grid.x(j);
      const std::span<const double> xs(&x, 1);
      const double d_fwd = j + 1 < nx ? (v[j + 1] - v[j]) / dx : (v[j] - v[j - 1]) / dx;
      const double d_bwd = j > 0 ? (v[j] - v[j - 1]) / dx : (v[j + 1] - v[j]) / dx;
      const double d_mid = 0.5 * (d_fwd + d_bwd);
      const double vxx = (j == 0 || j + 1 == nx) ? 0.0 : (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dx * dx);

      double sigma = 0.0, b = 0.0, f = 0.0, a = control[j];
      if (mode == HamiltonianMode::driver_argmax) {
        // z = v_x sigma uses sigma at the previous layer's control.
        volatility_at(spec, t, xs, a, law, std::span<double>(&sigma, 1));
        const double z = d_mid * sigma;
        const StateView s{t, xs, v[j], std::span<const double>(&z, 1), &law};
        a = maximize_over(set, spec.driver, s).a_star;
        volatility_at(spec, t, xs, a, law, std::span<double>(&sigma, 1));
        drift_at(spec, t, xs, a, law, std::span<double>(&b, 1));
        f = spec.driver.value(s, a);
        const double vx = b >= 0.0 ? d_fwd : d_bwd;
        out[j] = v[j] + dt * (b * vx + 0.5 * sigma * sigma * vxx + f);
      } else {
        const auto& affine = std::get<ControlAffineDrift>(spec.drift);
        sigma = std::get<ConstantVolatility>(spec.volatility).sigma(0, 0);
        const double z = d_mid * sigma;
        const StateView s{t, xs, v[j], std::span<const double>(&z, 1), &law};
        const double base = affine.c0[0] - affine.c1(0, 0) * x;
        const double slope = -3.0 * affine.c1(0, 0) * x;
        double best = -std::numeric_limits<double>::infinity();
        auto consider = [&](const IntervalUnion& part, double deriv) {
          const auto r = maximize_objective(
              part, [&](double u) { return (base + slope * u) * deriv + spec.driver.value(s, u); },
              [&](double u) { return slope * deriv + spec.driver.da(s, u); },
              [&](double u) { return spec.driver.daa(s, u); });
          if (r.value > best) {
            best = r.value;
            a = r.a_star;
          }
        };
        if (slope == 0.0) {
          consider(set, base >= 0.0 ? d_fwd : d_bwd);
        } else {
          const double root = -base / slope;
          // b >= 0 on the side of the root selected by the sign of the slope.
          if (auto up = clip(set, root, slope > 0.0))
            consider(*up, d_fwd);
          if (auto down = clip(set, root, slope < 0.0))
            consider(*down, d_bwd);
        }
        b = base + slope * a;
        out[j] = v[j] + dt * (best + 0.5 * sigma * sigma * vxx);
      }
      control[j] = a;

      const double diffusion = sigma * sigma * dt / (dx * dx);
      if (diffusion > 0.5 + 1e-12 || diffusion + std::abs(b) * dt / dx > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "explicit scheme violates the CFL bound at x = " << x << " (sigma^2 dt/dx^2 = "
           << diffusion << ", |b| dt/dx = " << std::abs(b) * dt / dx << ")";
        throw GridError(os.str());
      }
      if (!std::isfinite(out[j]))
        throw DivergenceError("HJB value became non-finite", n);
    }
  }
  return surface;
}

struct FeynmanKacGap {
  double pde_value = 0.0;
  double fbsde_value = 0.0;
  double abs_gap = 0.0;
  double rel_gap = 0.0;
};

/// Compares v(0, x0) from the HJB solve, run on the law flow of the particle
/// solution, with that solution's Y_0.
inline FeynmanKacGap feynman_kac_check(const ProblemSpec& spec, const Grid1D& grid,
                                       const SolutionPaths& paths, const TimeGrid& time_grid,
                                       HamiltonianMode mode = HamiltonianMode::driver_argmax) {
  const auto surface = solve_hjb(spec, grid, MeasureFlow::from_solution(paths, time_grid), mode);
  FeynmanKacGap gap;
  gap.pde_value = surface.interpolate(0, spec.x0[0]);
  gap.fbsde_value = paths.y0();
  gap.abs_gap = std::abs(gap.pde_value - gap.fbsde_value);
  gap.rel_gap = gap.abs_gap / std::max(std::abs(gap.fbsde_value), 1e-300);
  return gap;
}

} // namespace thetafbsde
