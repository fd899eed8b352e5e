#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "thetafbsde/driver.hpp"
#include "thetafbsde/errors.hpp"
#include "thetafbsde/measures.hpp"
#include "thetafbsde/uncertainty.hpp"

namespace thetafbsde {

enum class ActiveBoundary { interior, lower, upper };

struct OptimizerResult {
  double a_star = 0.0;
  double value = 0.0;
  ActiveBoundary boundary = ActiveBoundary::interior;
  bool tie = false;
  std::size_t interval = 0;
};

namespace detail {

struct IntervalOptimum {
  double a;
  ActiveBoundary boundary;
};

[[noreturn]] inline void concavity_violation(double a, double second) {
  std::ostringstream os;
  os.precision(17);
  os << "driver is not concave in the control: d2F/da2 = " << second << " at a = " << a;
  throw AuditError(os.str());
}

// dF/da is strictly decreasing on the interval, so its sign at the endpoints
// decides between clamping and an interior root. The root is found by Newton
// steps kept inside a shrinking sign bracket.
template <class Slope, class Curvature>
IntervalOptimum maximize_on_interval(double lo, double hi, Slope&& slope, Curvature&& curvature) {
  auto check = [&](double a) {
    const double h = curvature(a);
    if (!(h < 0.0))
      concavity_violation(a, h);
    return h;
  };

  const double g_lo = slope(lo);
  check(lo);
  if (lo == hi)
    return {lo, g_lo <= 0.0 ? ActiveBoundary::lower : ActiveBoundary::upper};
  if (g_lo <= 0.0)
    return {lo, ActiveBoundary::lower};
  const double g_hi = slope(hi);
  check(hi);
  if (g_hi >= 0.0)
    return {hi, ActiveBoundary::upper};

  double left = lo;
  double right = hi;
  double a = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double g = slope(a);
    if (g == 0.0)
      break;
    const double h = check(a);
    if (g > 0.0)
      left = a;
    else
      right = a;
    const double newton = a - g / h;
    const double next = (newton > left && newton < right) ? newton : 0.5 * (left + right);
    if (next == a || right - left <= 4.0 * std::numeric_limits<double>::epsilon() *
                                         std::max(1.0, std::abs(a)))
      break;
    const bool small_step = std::abs(next - a) <= 1e-15 * std::max(1.0, std::abs(a));
    a = next;
    if (small_step)
      break;
  }
  return {a, ActiveBoundary::interior};
}

} // namespace detail

/// Global maximizer of a strongly concave objective over an interval union.
/// Ties between intervals (values within tie_tolerance) go to the smaller
/// control and set the tie flag.
template <class Value, class Slope, class Curvature>
OptimizerResult maximize_objective(const IntervalUnion& set, Value&& value, Slope&& slope,
                                   Curvature&& curvature) {
  OptimizerResult best{};
  best.value = -std::numeric_limits<double>::infinity();
  const auto ivs = set.intervals();
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    const auto opt = detail::maximize_on_interval(ivs[i].lo, ivs[i].hi, slope, curvature);
    const double v = value(opt.a);
    if (v > best.value + tie_tolerance) {
      best = {opt.a, v, opt.boundary, false, i};
    } else if (std::abs(v - best.value) <= tie_tolerance) {
      best.tie = true;
    }
  }
  return best;
}

inline OptimizerResult maximize_over(const IntervalUnion& set, const Driver& driver,
                                     const StateView& p) {
  return maximize_objective(
      set, [&](double a) { return driver.value(p, a); }, [&](double a) { return driver.da(p, a); },
      [&](double a) { return driver.daa(p, a); });
}

/// G(p) = sup over the set of F(p, .).
inline double driver_G(const IntervalUnion& set, const Driver& driver, const StateView& p) {
  return maximize_over(set, driver, p).value;
}

// ---------------------------------------------------------------------------
// Counterexample calculus

namespace detail {

inline const QuarticCounterexample& require_quartic(const Driver& driver, const char* op) {
  const auto* q = driver.as<QuarticCounterexample>();
  if (!q)
    throw UsageError(std::string(op) + " is only defined for the quartic driver family");
  return *q;
}

// |a*| <= lambda |y| / (lambda - gamma) from the first-order condition, so this
// interval never binds.
inline IntervalUnion unconstrained_window(const QuarticCounterexample& q, double y) {
  const double r = 1.0 + 2.0 * q.lambda * std::abs(y) / (q.lambda - q.gamma);
  return IntervalUnion(-r, r);
}

} // namespace detail

/// Unconstrained maximizer of the quartic driver at y.
inline double quartic_argmax(const Driver& driver, double y) {
  const auto& q = detail::require_quartic(driver, "quartic_argmax");
  StateView s;
  s.y = y;
  return maximize_over(detail::unconstrained_window(q, y), driver, s).a_star;
}

/// Unconstrained G for the quartic driver, as a function of y alone.
inline double quartic_G(const Driver& driver, double y) {
  const auto& q = detail::require_quartic(driver, "quartic_G");
  StateView s;
  s.y = y;
  return driver_G(detail::unconstrained_window(q, y), driver, s);
}

/// Envelope-theorem derivative G'(y) = lambda (a*(y) - y).
inline double envelope_dG_dy(const Driver& driver, double y) {
  const auto& q = detail::require_quartic(driver, "envelope_dG_dy");
  return q.lambda * (quartic_argmax(driver, y) - y);
}

struct SecondDerivative {
  double analytic = 0.0;
  double numeric = 0.0;
};

/// G''(0) = lambda gamma / (lambda - gamma), with a central second difference
/// of G as companion estimate.
inline SecondDerivative second_derivative_at_zero(const Driver& driver, double h = 1e-3) {
  const auto& q = detail::require_quartic(driver, "second_derivative_at_zero");
  if (!(q.lambda > q.gamma))
    throw ParameterError("second_derivative_at_zero needs lambda > gamma");
  SecondDerivative out;
  out.analytic = q.lambda * q.gamma / (q.lambda - q.gamma);
  out.numeric =
      (quartic_G(driver, h) - 2.0 * quartic_G(driver, 0.0) + quartic_G(driver, -h)) / (h * h);
  return out;
}

// ---------------------------------------------------------------------------
// Audits and probes

/// Box of states and controls sampled by the concavity audit.
struct AuditRanges {
  double t_max = 1.0;
  double x_lo = -1.0, x_hi = 1.0;
  std::size_t x_dim = 1;
  double y_lo = -1.0, y_hi = 1.0;
  double z_lo = -1.0, z_hi = 1.0;
  std::size_t z_dim = 1;
  double a_lo = -2.0, a_hi = 2.0;
};

struct AuditWitness {
  double t = 0.0;
  std::vector<double> x;
  double y = 0.0;
  std::vector<double> z;
  double a = 0.0;
  double second_derivative = 0.0;
};

struct ConcavityAudit {
  double min_modulus = std::numeric_limits<double>::infinity(); // min of -d2F/da2
  double declared_modulus = 0.0;
  bool pass = true;
  std::optional<AuditWitness> witness;
};

inline ConcavityAudit concavity_audit(const Driver& driver, std::size_t samples,
                                      const AuditRanges& ranges = {}, std::uint64_t seed = 0) {
  ConcavityAudit audit;
  audit.declared_modulus = driver.modulus();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<double> x(ranges.x_dim), z(ranges.z_dim);
  EmpiricalMeasure law;
  for (std::size_t n = 0; n < samples; ++n) {
    StateView s;
    s.t = draw(0.0, ranges.t_max);
    for (auto& v : x)
      v = draw(ranges.x_lo, ranges.x_hi);
    for (auto& v : z)
      v = draw(ranges.z_lo, ranges.z_hi);
    s.x = x;
    s.z = z;
    s.y = draw(ranges.y_lo, ranges.y_hi);
    law = EmpiricalMeasure::dirac(s.y);
    s.law = &law;
    // Endpoints and the midpoint of the control range are always visited.
    double a;
    if (n % 4 == 0)
      a = ranges.a_lo;
    else if (n % 4 == 1)
      a = ranges.a_hi;
    else if (n % 4 == 2)
      a = 0.5 * (ranges.a_lo + ranges.a_hi);
    else
      a = draw(ranges.a_lo, ranges.a_hi);
    const double h = driver.daa(s, a);
    const double m = -h;
    if (m < audit.min_modulus) {
      audit.min_modulus = m;
      if (m < audit.declared_modulus - 1e-12) {
        audit.pass = false;
        audit.witness = AuditWitness{s.t, x, s.y, z, a, h};
      }
    }
  }
  return audit;
}

/// Parameter point for the Lipschitz probe; owns its storage.
struct ProbePoint {
  double t = 0.0;
  std::vector<double> x;
  double y = 0.0;
  std::vector<double> z;
  EmpiricalMeasure law;

  StateView view() const { return {t, x, y, z, &law}; }
};

using PairSampler = std::function<std::pair<ProbePoint, ProbePoint>(std::mt19937_64&)>;

struct LipschitzProbe {
  double max_ratio = 0.0;
  std::size_t evaluated = 0;
  std::size_t tie_exclusions = 0;   // tie flag fired or the optimum switched interval
  std::size_t zero_distance = 0;    // identical parameters, ratio undefined
};

/// Empirical Lipschitz constant of p -> a*(p), with the parameter distance
/// |dx| + |dy| + |dz| + W2(mu1, mu2).
inline LipschitzProbe lipschitz_probe(const AmbiguityMap& sets, const Driver& driver,
                                      const PairSampler& sampler, std::size_t n_pairs,
                                      std::uint64_t seed = 0) {
  LipschitzProbe out;
  std::mt19937_64 rng(seed);
  auto norm_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  for (std::size_t n = 0; n < n_pairs; ++n) {
    const auto [p1, p2] = sampler(rng);
    const double dist = norm_diff(p1.x, p2.x) + std::abs(p1.y - p2.y) + norm_diff(p1.z, p2.z) +
                        w2(p1.law, p2.law);
    if (dist == 0.0) {
      ++out.zero_distance;
      continue;
    }
    const auto r1 = maximize_over(sets.realize(p1.law), driver, p1.view());
    const auto r2 = maximize_over(sets.realize(p2.law), driver, p2.view());
    if (r1.tie || r2.tie || r1.interval != r2.interval) {
      ++out.tie_exclusions;
      continue;
    }
    ++out.evaluated;
    out.max_ratio = std::max(out.max_ratio, std::abs(r1.a_star - r2.a_star) / dist);
  }
  return out;
}

} // namespace thetafbsde
