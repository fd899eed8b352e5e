#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "thetafbsde/driver.hpp"
#include "thetafbsde/errors.hpp"
#include "thetafbsde/measures.hpp"
#include "thetafbsde/uncertainty.hpp"

namespace thetafbsde {

// ---------------------------------------------------------------------------
// Coefficient families

/// b(t, x, a) = C0 - (1 + 3a) C1 x
struct ControlAffineDrift {
  Eigen::VectorXd c0;
  Eigen::MatrixXd c1;
};

/// out = b(t, x, a, mu); out has the state dimension.
struct GenericDrift {
  std::function<void(double, std::span<const double>, double, const EmpiricalMeasure&,
                     std::span<double>)>
      fn;
};

using Drift = std::variant<ControlAffineDrift, GenericDrift>;

struct ConstantVolatility {
  Eigen::MatrixXd sigma; // k x d
};

/// out = sigma(t, x, a, mu), row-major k x d.
struct GenericVolatility {
  std::function<void(double, std::span<const double>, double, const EmpiricalMeasure&,
                     std::span<double>)>
      fn;
};

using Volatility = std::variant<ConstantVolatility, GenericVolatility>;

/// Phi(x) = c . x + offset
struct LinearTerminal {
  Eigen::VectorXd c;
  double offset = 0.0;
};

/// Phi(x) = x' Q x + c . x + offset
struct QuadraticTerminal {
  Eigen::MatrixXd q;
  Eigen::VectorXd c;
  double offset = 0.0;
};

struct ConstantTerminal {
  double value = 0.0;
};

struct GenericTerminal {
  std::function<double(std::span<const double>)> fn;
};

using Terminal = std::variant<LinearTerminal, QuadraticTerminal, ConstantTerminal, GenericTerminal>;

inline double evaluate(const Terminal& phi, std::span<const double> x) {
  return std::visit(
      [x](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, LinearTerminal>) {
          double v = f.offset;
          for (std::size_t i = 0; i < x.size(); ++i)
            v += f.c[static_cast<Eigen::Index>(i)] * x[i];
          return v;
        } else if constexpr (std::is_same_v<F, QuadraticTerminal>) {
          const auto n = static_cast<Eigen::Index>(x.size());
          double v = f.offset;
          for (Eigen::Index i = 0; i < n; ++i) {
            v += f.c[i] * x[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < n; ++j)
              v += x[static_cast<std::size_t>(i)] * f.q(i, j) * x[static_cast<std::size_t>(j)];
          }
          return v;
        } else if constexpr (std::is_same_v<F, ConstantTerminal>) {
          return f.value;
        } else {
          return f.fn(x);
        }
      },
      phi);
}

/// Phi + c, for translation checks.
inline Terminal shifted(const Terminal& phi, double c) {
  return std::visit(
      [c, &phi](const auto& f) -> Terminal {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, LinearTerminal> || std::is_same_v<F, QuadraticTerminal>) {
          F g = f;
          g.offset += c;
          return g;
        } else if constexpr (std::is_same_v<F, ConstantTerminal>) {
          return ConstantTerminal{f.value + c};
        } else {
          return GenericTerminal{[fn = f.fn, c](std::span<const double> x) { return fn(x) + c; }};
        }
      },
      phi);
}

// ---------------------------------------------------------------------------

/// Full coefficient bundle of the coupled system.
struct ProblemSpec {
  int k = 1;
  int d = 1;
  double horizon = 1.0;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  Drift drift = ControlAffineDrift{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)};
  Volatility volatility = ConstantVolatility{Eigen::MatrixXd::Zero(1, 1)};
  Driver driver = Driver::zero();
  Terminal terminal = ConstantTerminal{0.0};
  AmbiguityMap ambiguity = AmbiguityMap::fixed(IntervalUnion(0.0, 0.0));

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw ConfigError("horizon T must be positive and finite");
    if (k < 1 || d < 1)
      throw ConfigError("state and noise dimensions must be at least 1");
    if (x0.size() != k || !x0.allFinite())
      throw ConfigError("x0 must be a finite vector of length k");
    if (const auto* b = std::get_if<ControlAffineDrift>(&drift)) {
      if (b->c0.size() != k || b->c1.rows() != k || b->c1.cols() != k)
        throw ConfigError("drift C0 must have length k and C1 must be k x k");
      if (!b->c0.allFinite() || !b->c1.allFinite())
        throw ConfigError("drift coefficients must be finite");
      if ((b->c1 - b->c1.transpose()).cwiseAbs().maxCoeff() > 0.0)
        throw ConfigError("drift C1 must be symmetric");
    } else if (!std::get<GenericDrift>(drift).fn) {
      throw ConfigError("generic drift needs a callable");
    }
    if (const auto* s = std::get_if<ConstantVolatility>(&volatility)) {
      if (s->sigma.rows() != k || s->sigma.cols() != d || !s->sigma.allFinite())
        throw ConfigError("sigma must be a finite k x d matrix");
    } else if (!std::get<GenericVolatility>(volatility).fn) {
      throw ConfigError("generic volatility needs a callable");
    }
    if (const auto* l = std::get_if<LinearTerminal>(&terminal)) {
      if (l->c.size() != k || !l->c.allFinite() || !std::isfinite(l->offset))
        throw ConfigError("linear terminal needs a finite vector of length k");
    } else if (const auto* q = std::get_if<QuadraticTerminal>(&terminal)) {
      if (q->q.rows() != k || q->q.cols() != k || q->c.size() != k)
        throw ConfigError("quadratic terminal needs Q k x k and c of length k");
    } else if (const auto* g = std::get_if<GenericTerminal>(&terminal); g && !g->fn) {
      throw ConfigError("generic terminal needs a callable");
    }
  }

  /// True when sigma is a constant zero matrix.
  bool noiseless() const {
    const auto* s = std::get_if<ConstantVolatility>(&volatility);
    return s && s->sigma.isZero(0.0);
  }
};

inline void drift_at(const ProblemSpec& spec, double t, std::span<const double> x, double a,
                     const EmpiricalMeasure& law, std::span<double> out) {
  if (const auto* b = std::get_if<ControlAffineDrift>(&spec.drift)) {
    const double m = 1.0 + 3.0 * a;
    for (int i = 0; i < spec.k; ++i) {
      double v = b->c0[i];
      for (int j = 0; j < spec.k; ++j)
        v -= m * b->c1(i, j) * x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = v;
    }
  } else {
    std::get<GenericDrift>(spec.drift).fn(t, x, a, law, out);
  }
}

/// Row-major k x d.
inline void volatility_at(const ProblemSpec& spec, double t, std::span<const double> x, double a,
                          const EmpiricalMeasure& law, std::span<double> out) {
  if (const auto* s = std::get_if<ConstantVolatility>(&spec.volatility)) {
    for (int i = 0; i < spec.k; ++i)
      for (int j = 0; j < spec.d; ++j)
        out[static_cast<std::size_t>(i * spec.d + j)] = s->sigma(i, j);
  } else {
    std::get<GenericVolatility>(spec.volatility).fn(t, x, a, law, out);
  }
}

// ---------------------------------------------------------------------------

class TimeGrid {
public:
  TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
    if (n_steps == 0)
      throw ConfigError("time grid needs at least one step");
    if (!(horizon > 0.0))
      throw ConfigError("time grid horizon must be positive");
  }

  std::size_t steps() const noexcept { return n_steps_; }
  std::size_t nodes() const noexcept { return n_steps_ + 1; }
  double horizon() const noexcept { return horizon_; }
  double dt() const noexcept { return horizon_ / static_cast<double>(n_steps_); }
  double time(std::size_t i) const noexcept {
    return i == n_steps_ ? horizon_ : static_cast<double>(i) * dt();
  }

private:
  double horizon_;
  std::size_t n_steps_;
};

/// (node x particle) arrays for X, Y, Z, A and the per-node law of Y.
class SolutionPaths {
public:
  SolutionPaths() = default;
  SolutionPaths(std::size_t nodes, std::size_t particles, int k, int d)
      : nodes_(nodes), particles_(particles), k_(static_cast<std::size_t>(k)),
        d_(static_cast<std::size_t>(d)), x_(nodes * particles * k_), y_(nodes * particles),
        z_(nodes * particles * d_), a_(nodes * particles), laws_(nodes) {}

  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t particles() const noexcept { return particles_; }
  int k() const noexcept { return static_cast<int>(k_); }
  int d() const noexcept { return static_cast<int>(d_); }

  std::span<double> x(std::size_t i, std::size_t p) { return {x_.data() + (i * particles_ + p) * k_, k_}; }
  std::span<const double> x(std::size_t i, std::size_t p) const {
    return {x_.data() + (i * particles_ + p) * k_, k_};
  }
  /// All particles' states at node i, particle-major.
  std::span<const double> x_node(std::size_t i) const {
    return {x_.data() + i * particles_ * k_, particles_ * k_};
  }
  std::span<double> z(std::size_t i, std::size_t p) { return {z_.data() + (i * particles_ + p) * d_, d_}; }
  std::span<const double> z(std::size_t i, std::size_t p) const {
    return {z_.data() + (i * particles_ + p) * d_, d_};
  }
  double& y(std::size_t i, std::size_t p) { return y_[i * particles_ + p]; }
  double y(std::size_t i, std::size_t p) const { return y_[i * particles_ + p]; }
  std::span<const double> y_node(std::size_t i) const { return {y_.data() + i * particles_, particles_}; }
  double& a(std::size_t i, std::size_t p) { return a_[i * particles_ + p]; }
  double a(std::size_t i, std::size_t p) const { return a_[i * particles_ + p]; }

  std::vector<double>& x_data() noexcept { return x_; }
  std::vector<double>& y_data() noexcept { return y_; }
  std::vector<double>& z_data() noexcept { return z_; }
  std::vector<double>& a_data() noexcept { return a_; }
  const std::vector<double>& x_data() const noexcept { return x_; }
  const std::vector<double>& y_data() const noexcept { return y_; }
  const std::vector<double>& z_data() const noexcept { return z_; }
  const std::vector<double>& a_data() const noexcept { return a_; }

  const EmpiricalMeasure& law(std::size_t i) const { return laws_[i]; }
  std::vector<EmpiricalMeasure>& laws() noexcept { return laws_; }
  const std::vector<EmpiricalMeasure>& laws() const noexcept { return laws_; }

  /// Rebuild every per-node law from the current Y values.
  void refresh_laws() {
    for (std::size_t i = 0; i < nodes_; ++i) {
      const auto row = y_node(i);
      laws_[i] = EmpiricalMeasure(std::vector<double>(row.begin(), row.end()));
    }
  }

  double y0() const { return y_.empty() ? 0.0 : y_[0]; }
  /// Monte Carlo standard error of Y_0.
  double y0_standard_error = 0.0;

private:
  std::size_t nodes_ = 0, particles_ = 0, k_ = 0, d_ = 0;
  std::vector<double> x_, y_, z_, a_;
  std::vector<EmpiricalMeasure> laws_;
};

} // namespace thetafbsde
