#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thetafbsde/coupling.hpp"
#include "thetafbsde/optimizer.hpp"
#include "thetafbsde/problem.hpp"
#include "thetafbsde/properties.hpp"

namespace thetafbsde {

// ---------------------------------------------------------------------------
// Sub-additivity counterexample

struct CounterexampleReport {
  double lambda = 0.0, gamma = 0.0, c = 0.0, horizon = 0.0;
  std::size_t steps = 0;
  double g_at_zero = 0.0;
  double dg_envelope = 0.0;    // lambda (a*(0) - 0)
  double dg_difference = 0.0;  // central difference of G at 0, h = 1e-4
  SecondDerivative g2;
  double e_zero = 0.0, e_plus = 0.0, e_minus = 0.0;
  double gap = 0.0;
  double translation_defect = 0.0; // E[0 + c] - (E[0] + c)
  ConcavityAudit audit;
};

inline CounterexampleReport run_counterexample(double lambda, double gamma, double c,
                                               double horizon, std::size_t steps) {
  if (!(lambda > gamma && gamma > 0.0))
    throw ParameterError("counterexample needs lambda > gamma > 0");
  const auto problem = DeterministicProblem::quartic(lambda, gamma, horizon, steps);
  const Driver& f = problem.driver;

  CounterexampleReport r;
  r.lambda = lambda;
  r.gamma = gamma;
  r.c = c;
  r.horizon = horizon;
  r.steps = steps;
  r.g_at_zero = quartic_G(f, 0.0);
  r.dg_envelope = envelope_dG_dy(f, 0.0);
  const double h = 1e-4;
  r.dg_difference = (quartic_G(f, h) - quartic_G(f, -h)) / (2.0 * h);
  r.g2 = second_derivative_at_zero(f);
  const auto sub = check_subadditivity(problem, std::abs(c));
  r.e_zero = sub.e_zero;
  r.e_plus = c >= 0.0 ? sub.e_plus : sub.e_minus;
  r.e_minus = c >= 0.0 ? sub.e_minus : sub.e_plus;
  r.gap = sub.gap;
  r.translation_defect = check_translation_invariance(problem, 0.0, c);
  AuditRanges ranges;
  ranges.t_max = horizon;
  ranges.a_lo = -3.0;
  ranges.a_hi = 3.0;
  r.audit = concavity_audit(f, 4000, ranges);
  return r;
}

// ---------------------------------------------------------------------------
// Global well-posedness hypotheses of the application family

struct LedgerEntry {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AssumptionLedger {
  std::vector<LedgerEntry> entries;
  double delta = 0.0;      // min over K of 1 + 3w
  double lambda_min = 0.0; // smallest eigenvalue of C1
  bool all_pass = false;
};

inline AssumptionLedger verify_global_assumptions(const Eigen::MatrixXd& c1,
                                                  const AmbiguityMap& sets, double kappa,
                                                  double f0_lipschitz) {
  AssumptionLedger ledger;
  auto add = [&](std::string name, bool pass, std::string detail) {
    ledger.entries.push_back({std::move(name), pass, std::move(detail)});
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };

  const bool square = c1.rows() == c1.cols() && c1.rows() > 0;
  const bool symmetric = square && (c1 - c1.transpose()).cwiseAbs().maxCoeff() == 0.0;
  add("C1 symmetric", symmetric, symmetric ? "" : "C1 differs from its transpose");
  if (symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c1);
    ledger.lambda_min = eig.eigenvalues().minCoeff();
  }
  add("C1 positive definite", symmetric && ledger.lambda_min > 0.0,
      "lambda_min(C1) = " + fmt(ledger.lambda_min));

  const auto range = sets.global_range();
  ledger.delta = 1.0 + 3.0 * range.lo;
  add("1 + 3w >= delta > 0 on K", ledger.delta > 0.0,
      "min over K at w = " + fmt(range.lo) + " gives 1 + 3w = " + fmt(ledger.delta));
  add("kappa > 0", kappa > 0.0, "kappa = " + fmt(kappa));
  add("f0 Lipschitz bound finite", std::isfinite(f0_lipschitz), "L_f0 = " + fmt(f0_lipschitz));

  ledger.all_pass = std::all_of(ledger.entries.begin(), ledger.entries.end(),
                                [](const LedgerEntry& e) { return e.pass; });
  return ledger;
}

// ---------------------------------------------------------------------------
// Ambiguous dynamical system and its convexified twin

struct ApplicationConfig {
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Constant(1, 1, 0.25);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(1, 1, 0.3);
  double kappa = 1.0;
  double w0 = 0.6;
  BaseValue f0 = LinearBase{0.5};
  AmbiguityMap uncertainty = AmbiguityMap::fixed(IntervalUnion({{-2.0, -1.0}, {1.0, 2.0}}));
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  double horizon = 1.0;
  std::optional<Terminal> terminal; // defaults to Phi(x) = x_1

  ProblemSpec spec() const {
    ProblemSpec s;
    s.k = static_cast<int>(x0.size());
    s.d = static_cast<int>(sigma.cols());
    s.horizon = horizon;
    s.x0 = x0;
    s.drift = ControlAffineDrift{c0, c1};
    s.volatility = ConstantVolatility{sigma};
    s.driver = Driver::quadratic_penalty(kappa, w0, f0);
    if (terminal) {
      s.terminal = *terminal;
    } else {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(x0.size());
      c[0] = 1.0;
      s.terminal = LinearTerminal{c, 0.0};
    }
    s.ambiguity = uncertainty;
    return s;
  }

  ProblemSpec convexified_spec() const {
    ProblemSpec s = spec();
    s.ambiguity = uncertainty.convexified();
    return s;
  }
};

struct RegimeSummary {
  std::string name;
  double control_mean = 0.0, control_min = 0.0, control_max = 0.0;
  bool control_constant = false;
  double drift_multiplier = 0.0; // 1 + 3 * control_mean
  double y0 = 0.0, y0_standard_error = 0.0;
  double xT_mean = 0.0, xT_std = 0.0;
  std::vector<double> x_mean_path; // first state component
  PicardReport report;
};

struct ApplicationReport {
  /// Exact projection of w0 and the resulting multipliers for static sets.
  std::optional<double> projected_control, convexified_control;
  std::optional<double> projected_multiplier, convexified_multiplier;
  RegimeSummary theta, convexified;
  AssumptionLedger assumptions;
  SolutionPaths theta_paths, convexified_paths;
};

namespace detail {

inline RegimeSummary summarize(std::string name, const PicardResult& run, const TimeGrid& grid) {
  RegimeSummary s;
  s.name = std::move(name);
  const auto& p = run.paths;
  const auto& a = p.a_data();
  s.control_min = *std::min_element(a.begin(), a.end());
  s.control_max = *std::max_element(a.begin(), a.end());
  double sum = 0.0;
  for (double v : a)
    sum += v;
  s.control_mean = sum / static_cast<double>(a.size());
  s.control_constant = s.control_max - s.control_min <= 1e-12;
  s.drift_multiplier = 1.0 + 3.0 * s.control_mean;
  s.y0 = p.y0();
  s.y0_standard_error = p.y0_standard_error;
  const std::size_t n = p.particles();
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    double m = 0.0;
    for (std::size_t q = 0; q < n; ++q)
      m += p.x(i, q)[0];
    s.x_mean_path.push_back(m / static_cast<double>(n));
  }
  s.xT_mean = s.x_mean_path.back();
  double var = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double d = p.x(grid.steps(), q)[0] - s.xT_mean;
    var += d * d;
  }
  s.xT_std = std::sqrt(var / static_cast<double>(n));
  s.report = run.report;
  return s;
}

} // namespace detail

inline ApplicationReport run_application(const ApplicationConfig& config, const TimeGrid& grid,
                                         const PicardOptions& options) {
  ApplicationReport out;
  if (config.uncertainty.is_static()) {
    const double theta = config.uncertainty.theta(EmpiricalMeasure{});
    const auto set = config.uncertainty.set_at(theta);
    out.projected_control = project(set, config.w0).point;
    out.convexified_control = project(convex_hull(set), config.w0).point;
    out.projected_multiplier = 1.0 + 3.0 * *out.projected_control;
    out.convexified_multiplier = 1.0 + 3.0 * *out.convexified_control;
  }
  out.assumptions = verify_global_assumptions(config.c1, config.uncertainty, config.kappa,
                                              lipschitz_bound(config.f0));

  auto theta_run = picard_solve(config.spec(), grid, options);
  auto convex_run = picard_solve(config.convexified_spec(), grid, options);
  out.theta = detail::summarize("theta", theta_run, grid);
  out.convexified = detail::summarize("convexified", convex_run, grid);
  out.theta_paths = std::move(theta_run.paths);
  out.convexified_paths = std::move(convex_run.paths);
  return out;
}

} // namespace thetafbsde
