#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "thetafbsde/errors.hpp"
#include "thetafbsde/measures.hpp"

namespace thetafbsde {

/// Arguments of the driver other than the control: (t, x, y, z, mu).
struct StateView {
  double t = 0.0;
  std::span<const double> x{};
  double y = 0.0;
  std::span<const double> z{};
  const EmpiricalMeasure* law = nullptr;
};

// ---------------------------------------------------------------------------
// y-dependent part f0 of the quadratic-penalty driver

struct ZeroBase {};

struct LinearBase {
  double slope = 0.0;
};

/// Piecewise-linear interpolation of a table, extended linearly past both ends.
struct TableBase {
  std::vector<double> y;
  std::vector<double> f;
};

using BaseValue = std::variant<ZeroBase, LinearBase, TableBase>;

inline void validate(const TableBase& t) {
  if (t.y.size() < 2 || t.y.size() != t.f.size())
    throw ConfigError("f0 table needs at least two (y, f) pairs of equal length");
  for (std::size_t i = 1; i < t.y.size(); ++i)
    if (!(t.y[i - 1] < t.y[i]))
      throw ConfigError("f0 table abscissae must be strictly increasing");
}

inline double evaluate(const BaseValue& f0, double y) {
  return std::visit(
      [y](const auto& b) -> double {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ZeroBase>) {
          return 0.0;
        } else if constexpr (std::is_same_v<B, LinearBase>) {
          return b.slope * y;
        } else {
          const auto it = std::upper_bound(b.y.begin(), b.y.end(), y);
          std::size_t i = static_cast<std::size_t>(it - b.y.begin());
          i = std::clamp<std::size_t>(i, 1, b.y.size() - 1);
          const double w = (y - b.y[i - 1]) / (b.y[i] - b.y[i - 1]);
          return b.f[i - 1] + w * (b.f[i] - b.f[i - 1]);
        }
      },
      f0);
}

inline double lipschitz_bound(const BaseValue& f0) {
  return std::visit(
      [](const auto& b) -> double {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ZeroBase>) {
          return 0.0;
        } else if constexpr (std::is_same_v<B, LinearBase>) {
          return std::abs(b.slope);
        } else {
          double l = 0.0;
          for (std::size_t i = 1; i < b.y.size(); ++i)
            l = std::max(l, std::abs((b.f[i] - b.f[i - 1]) / (b.y[i] - b.y[i - 1])));
          return l;
        }
      },
      f0);
}

// ---------------------------------------------------------------------------
// Driver families

/// F = f0(y) - kappa/2 (a - w0)^2
struct QuadraticPenalty {
  BaseValue f0 = ZeroBase{};
  double kappa = 1.0;
  double w0 = 0.0;
};

/// F = gamma/4 - gamma/4 (a^2 - 1)^2 - lambda/2 (a - y)^2, lambda > gamma > 0.
struct QuarticCounterexample {
  double lambda = 2.0;
  double gamma = 1.0;
};

struct GenericDriver {
  std::function<double(const StateView&, double)> value;
  std::function<double(const StateView&, double)> da;
  std::function<double(const StateView&, double)> daa;
  double kappa = 0.0;
  bool depends_on_y = true;
};

using DriverFamily = std::variant<QuadraticPenalty, QuarticCounterexample, GenericDriver>;

/// Strongly concave driver F(t, x, y, z, a, mu) with its first two control
/// derivatives and a declared concavity modulus.
class Driver {
public:
  explicit Driver(DriverFamily family) : family_(std::move(family)) { validate(); }

  static Driver quadratic_penalty(double kappa, double w0, BaseValue f0 = ZeroBase{}) {
    return Driver(QuadraticPenalty{std::move(f0), kappa, w0});
  }
  static Driver quartic(double lambda, double gamma) {
    return Driver(QuarticCounterexample{lambda, gamma});
  }
  /// Penalty driver with f0 = 0: identically zero along any solution whose
  /// control sits at w0.
  static Driver zero(double w0 = 0.0) { return quadratic_penalty(1.0, w0); }

  const DriverFamily& family() const noexcept { return family_; }

  template <class Family>
  const Family* as() const noexcept {
    return std::get_if<Family>(&family_);
  }

  double value(const StateView& s, double a) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, QuadraticPenalty>) {
            const double d = a - f.w0;
            return evaluate(f.f0, s.y) - 0.5 * f.kappa * d * d;
          } else if constexpr (std::is_same_v<F, QuarticCounterexample>) {
            const double q = a * a - 1.0;
            const double d = a - s.y;
            return 0.25 * f.gamma - 0.25 * f.gamma * q * q - 0.5 * f.lambda * d * d;
          } else {
            return f.value(s, a);
          }
        },
        family_);
  }

  double da(const StateView& s, double a) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, QuadraticPenalty>) {
            return -f.kappa * (a - f.w0);
          } else if constexpr (std::is_same_v<F, QuarticCounterexample>) {
            return -f.gamma * a * (a * a - 1.0) - f.lambda * (a - s.y);
          } else {
            return f.da(s, a);
          }
        },
        family_);
  }

  double daa(const StateView& s, double a) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, QuadraticPenalty>) {
            return -f.kappa;
          } else if constexpr (std::is_same_v<F, QuarticCounterexample>) {
            return -f.gamma * (3.0 * a * a - 1.0) - f.lambda;
          } else {
            return f.daa(s, a);
          }
        },
        family_);
  }

  /// Declared kappa with d2F/da2 <= -kappa.
  double modulus() const {
    return std::visit(
        [](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, QuadraticPenalty>)
            return f.kappa;
          else if constexpr (std::is_same_v<F, QuarticCounterexample>)
            return f.lambda - f.gamma;
          else
            return f.kappa;
        },
        family_);
  }

  bool depends_on_y() const {
    return std::visit(
        [](const auto& f) -> bool {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, QuadraticPenalty>)
            return !std::holds_alternative<ZeroBase>(f.f0);
          else if constexpr (std::is_same_v<F, QuarticCounterexample>)
            return true;
          else
            return f.depends_on_y;
        },
        family_);
  }

private:
  void validate() const {
    std::visit(
        [](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, QuadraticPenalty>) {
            if (!(f.kappa > 0.0) || !std::isfinite(f.kappa))
              throw ParameterError("quadratic-penalty driver needs kappa > 0");
            if (!std::isfinite(f.w0))
              throw ParameterError("quadratic-penalty driver needs a finite w0");
            if (const auto* t = std::get_if<TableBase>(&f.f0))
              thetafbsde::validate(*t);
          } else if constexpr (std::is_same_v<F, QuarticCounterexample>) {
            if (!(f.lambda > f.gamma && f.gamma > 0.0))
              throw ParameterError("quartic driver needs lambda > gamma > 0");
          } else {
            if (!f.value || !f.da || !f.daa)
              throw ParameterError("generic driver needs value, da and daa callables");
            if (!(f.kappa > 0.0))
              throw ParameterError("generic driver needs a declared kappa > 0");
          }
        },
        family_);
  }

  DriverFamily family_;
};

} // namespace thetafbsde
