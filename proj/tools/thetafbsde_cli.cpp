// thetafbsde command-line driver.
//
//   thetafbsde solve          --config FILE [--seed N] [--particles N] ...
//   thetafbsde counterexample [--lambda L --gamma G --c C --T T]
//   thetafbsde application    [--config FILE]
//   thetafbsde pde-check      --config FILE
//   thetafbsde properties     [--config FILE]
//
// Exit codes: 0 success, 1 usage/config/file error, 2 numerical failure,
// 3 property-check failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "thetafbsde.hpp"

namespace fs = std::filesystem;
using namespace thetafbsde;
using Json = nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;
constexpr int exit_property = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles, steps, max_iter;
  std::optional<double> tol;
  std::optional<unsigned> threads;
  std::string out = "./out";
  // counterexample
  std::optional<double> lambda, gamma, c, horizon;
};

void add_common(CLI::App* cmd, Flags& f, bool config_required) {
  auto* cfg = cmd->add_option("--config", f.config, "JSON config file");
  if (config_required)
    cfg->required();
  cmd->add_option("--seed", f.seed, "RNG seed (default 0)");
  cmd->add_option("--particles", f.particles, "particle count (default 10000)");
  cmd->add_option("--steps", f.steps, "time steps (default 100)");
  cmd->add_option("--out", f.out, "output directory (default ./out)");
  cmd->add_option("--tol", f.tol, "Picard tolerance (default 1e-6)");
  cmd->add_option("--max-iter", f.max_iter, "Picard iteration cap (default 50)");
  cmd->add_option("--threads", f.threads, "worker threads (default: hardware count)");
}

RunConfig load(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    if (!fs::exists(f.config))
      throw ConfigError("config file '" + f.config + "' does not exist");
    cfg = load_config(f.config);
  }
  auto& p = cfg.solver.picard;
  if (f.seed)
    p.seed = *f.seed;
  if (f.particles)
    p.particles = *f.particles;
  if (f.steps)
    cfg.solver.steps = *f.steps;
  if (f.tol)
    p.tol = *f.tol;
  if (f.max_iter)
    p.max_iter = *f.max_iter;
  if (f.threads)
    p.threads = *f.threads;
  p.threads = resolve_threads(p.threads);
  if (cfg.solver.steps == 0)
    throw ConfigError("steps must be positive");
  return cfg;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// The acceptance application unless the config says otherwise.
ApplicationConfig application_from(const RunConfig& cfg, bool from_file) {
  ApplicationConfig app;
  if (!from_file || !cfg.has_problem)
    return app;
  const ProblemSpec& s = cfg.spec;
  const auto* b = std::get_if<ControlAffineDrift>(&s.drift);
  const auto* v = std::get_if<ConstantVolatility>(&s.volatility);
  const auto* q = s.driver.as<QuadraticPenalty>();
  if (!b || !v || !q)
    throw ConfigError("application needs a control_affine drift and a quadratic_penalty driver");
  app.c0 = b->c0;
  app.c1 = b->c1;
  app.sigma = v->sigma;
  app.kappa = q->kappa;
  app.w0 = q->w0;
  app.f0 = q->f0;
  app.uncertainty = s.ambiguity;
  app.x0 = s.x0;
  app.horizon = s.horizon;
  app.terminal = s.terminal;
  return app;
}

Json regime_json(const RegimeSummary& r) {
  return {{"control_mean", r.control_mean},
          {"control_min", r.control_min},
          {"control_max", r.control_max},
          {"control_constant", r.control_constant},
          {"drift_multiplier", r.drift_multiplier},
          {"Y0", r.y0},
          {"Y0_standard_error", r.y0_standard_error},
          {"XT_mean", r.xT_mean},
          {"XT_std", r.xT_std},
          {"X_mean_path", r.x_mean_path},
          {"picard", to_json(r.report)}};
}

int cmd_solve(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = load(f);
  if (!cfg.has_problem)
    throw ConfigError("solve needs drift, driver and terminal sections in the config");
  const TimeGrid grid(cfg.spec.horizon, cfg.solver.steps);
  const auto sol = picard_solve(cfg.spec, grid, cfg.solver.picard);
  const fs::path out(f.out);
  write_paths_csv(out / "paths.csv", sol.paths, grid);
  write_json(out / "picard.json", to_json(sol.report));
  const double wall = elapsed(start);
  write_json(out / "summary.json", summary_json(sol.paths.y0(), sol.report, cfg.solver.picard.seed, wall));
  std::printf("solve: Y0=%.10g se=%.3g iterations=%zu converged=%s seed=%llu\n", sol.paths.y0(),
              sol.paths.y0_standard_error, sol.report.iterations,
              sol.report.converged ? "true" : "false",
              static_cast<unsigned long long>(cfg.solver.picard.seed));
  return exit_ok;
}

int cmd_counterexample(const Flags& f) {
  const RunConfig cfg = load(f);
  CounterexampleSettings s = cfg.counterexample;
  if (f.lambda)
    s.lambda = *f.lambda;
  if (f.gamma)
    s.gamma = *f.gamma;
  if (f.c)
    s.c = *f.c;
  if (f.horizon)
    s.horizon = *f.horizon;
  if (f.steps)
    s.steps = *f.steps;
  const auto r = run_counterexample(s.lambda, s.gamma, s.c, s.horizon, s.steps);
  Json j = {{"lambda", r.lambda},
            {"gamma", r.gamma},
            {"c", r.c},
            {"T", r.horizon},
            {"steps", r.steps},
            {"G0", r.g_at_zero},
            {"dG0_envelope", r.dg_envelope},
            {"dG0_difference", r.dg_difference},
            {"d2G0_analytic", r.g2.analytic},
            {"d2G0_numeric", r.g2.numeric},
            {"E_zero", r.e_zero},
            {"E_plus", r.e_plus},
            {"E_minus", r.e_minus},
            {"subadditivity_gap", r.gap},
            {"translation_defect", r.translation_defect},
            {"concavity_audit",
             {{"pass", r.audit.pass},
              {"min_modulus", r.audit.min_modulus},
              {"declared_modulus", r.audit.declared_modulus}}}};
  write_json(fs::path(f.out) / "counterexample.json", j);
  std::printf("counterexample: gap=%+.6g E[c]=%.10g E[-c]=%.10g E[0]=%.3g G''(0)=%.8g/%.8g "
              "translation_defect=%.6g audit=%s\n",
              r.gap, r.e_plus, r.e_minus, r.e_zero, r.g2.numeric, r.g2.analytic,
              r.translation_defect, r.audit.pass ? "pass" : "fail");
  return r.audit.pass ? exit_ok : exit_property;
}

int cmd_application(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = load(f);
  const ApplicationConfig app = application_from(cfg, !f.config.empty());
  const TimeGrid grid(app.horizon, cfg.solver.steps);
  const auto r = run_application(app, grid, cfg.solver.picard);

  Json ledger = Json::array();
  for (const auto& e : r.assumptions.entries)
    ledger.push_back({{"check", e.name}, {"pass", e.pass}, {"detail", e.detail}});
  Json j = {{"theta", regime_json(r.theta)},
            {"convexified", regime_json(r.convexified)},
            {"global_assumptions",
             {{"all_pass", r.assumptions.all_pass},
              {"delta", r.assumptions.delta},
              {"lambda_min_C1", r.assumptions.lambda_min},
              {"entries", ledger}}}};
  if (r.projected_control) {
    j["exact"] = {{"theta_control", *r.projected_control},
                  {"convexified_control", *r.convexified_control},
                  {"theta_multiplier", *r.projected_multiplier},
                  {"convexified_multiplier", *r.convexified_multiplier}};
  }
  const fs::path out(f.out);
  write_json(out / "application.json", j);
  write_paths_csv(out / "paths_theta.csv", r.theta_paths, grid);
  write_paths_csv(out / "paths_convexified.csv", r.convexified_paths, grid);
  write_json(out / "summary.json",
             summary_json(r.theta.y0, r.theta.report, cfg.solver.picard.seed, elapsed(start)));
  if (!r.assumptions.all_pass)
    std::fprintf(stderr, "warning: global well-posedness hypotheses not met; local solve only\n");
  std::printf("application: theta control=%.10g multiplier=%.10g Y0=%.8g | convexified "
              "control=%.10g multiplier=%.10g Y0=%.8g\n",
              r.theta.control_mean, r.theta.drift_multiplier, r.theta.y0,
              r.convexified.control_mean, r.convexified.drift_multiplier, r.convexified.y0);
  return exit_ok;
}

int cmd_pde_check(const Flags& f, std::optional<double> gap_flag) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = load(f);
  const double gap_tol = gap_flag.value_or(cfg.pde.gap_tol);
  if (!cfg.has_problem)
    throw ConfigError("pde-check needs drift, driver and terminal sections in the config");
  const ProblemSpec& spec = cfg.spec;
  const TimeGrid grid(spec.horizon, cfg.solver.steps);
  const auto sol = picard_solve(spec, grid, cfg.solver.picard);

  Grid1D g = default_grid(spec, cfg.pde.nx);
  if (cfg.pde.x_min || cfg.pde.x_max)
    g = cfl_grid(spec, cfg.pde.x_min.value_or(g.x_min), cfg.pde.x_max.value_or(g.x_max), cfg.pde.nx);
  if (cfg.pde.nt)
    g.nt = *cfg.pde.nt;
  const auto surface = solve_hjb(spec, g, MeasureFlow::from_solution(sol.paths, grid), cfg.pde.mode);
  FeynmanKacGap gap;
  gap.pde_value = surface.interpolate(0, spec.x0[0]);
  gap.fbsde_value = sol.paths.y0();
  gap.abs_gap = std::abs(gap.pde_value - gap.fbsde_value);
  gap.rel_gap = gap.abs_gap / std::max(std::abs(gap.fbsde_value), 1e-300);

  const fs::path out(f.out);
  write_surface_csv(out / "value_surface.csv", surface);
  write_paths_csv(out / "paths.csv", sol.paths, grid);
  write_json(out / "pde_check.json", {{"pde_value", gap.pde_value},
                                      {"fbsde_value", gap.fbsde_value},
                                      {"fbsde_standard_error", sol.paths.y0_standard_error},
                                      {"abs_gap", gap.abs_gap},
                                      {"rel_gap", gap.rel_gap},
                                      {"tolerance", gap_tol},
                                      {"grid", {{"x_min", g.x_min}, {"x_max", g.x_max}, {"nx", g.nx}, {"nt", g.nt}}}});
  write_json(out / "summary.json",
             summary_json(sol.paths.y0(), sol.report, cfg.solver.picard.seed, elapsed(start)));
  const bool pass = gap.rel_gap <= gap_tol;
  std::printf("pde-check: v(0,x0)=%.8g Y0=%.8g abs_gap=%.3g rel_gap=%.3g (tol %.3g) %s\n",
              gap.pde_value, gap.fbsde_value, gap.abs_gap, gap.rel_gap, gap_tol,
              pass ? "pass" : "FAIL");
  return pass ? exit_ok : exit_property;
}

int cmd_properties(const Flags& f) {
  const RunConfig cfg = load(f);
  const auto& ce = cfg.counterexample;
  const auto& ps = cfg.properties;
  const auto det = DeterministicProblem::quartic(ce.lambda, ce.gamma, ce.horizon, ce.steps);
  Json j;
  bool ok = true;

  double consistency = 0.0;
  for (double xi : {-0.5, 0.0, 0.5})
    consistency = std::max(consistency, check_dynamic_consistency(det, xi, 0.5 * ce.horizon));
  std::size_t mono = 0;
  for (std::size_t k = 0; k < ps.pairs; ++k) {
    const double lo = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(ps.pairs, 1));
    mono += check_monotonicity(det, lo + ps.shift, lo).pass ? 1 : 0;
  }
  const auto sub = check_subadditivity(det, ps.shift);
  const auto mart = martingale_diagnostics(det, det.path(0.3));
  j["deterministic"] = {{"dynamic_consistency", consistency},
                        {"monotone_pairs", mono},
                        {"pairs", ps.pairs},
                        {"subadditivity_gap", sub.gap},
                        {"translation_defect", check_translation_invariance(det, 0.0, ps.shift)},
                        {"martingale_max_deviation", mart.max_deviation}};
  ok = ok && consistency <= 1e-8 && mono == ps.pairs;

  if (cfg.has_problem) {
    const ProblemSpec& spec = cfg.spec;
    const TimeGrid grid(spec.horizon, cfg.solver.steps);
    const auto& opt = cfg.solver.picard;
    const auto base = picard_solve(spec, grid, opt);
    const auto m = martingale_diagnostics(spec, grid, base.paths);
    const auto mono_s = check_monotonicity(spec, grid, opt, shifted(spec.terminal, ps.shift), spec.terminal);
    const auto trans = check_translation_invariance(spec, grid, opt, spec.terminal, ps.shift);
    const auto dyn = check_dynamic_consistency(spec, grid, opt, grid.steps() / 2);
    j["stochastic"] = {{"Y0", base.paths.y0()},
                       {"martingale_fraction_within_3", m.fraction_within_3},
                       {"max_abs_driver", m.max_abs_driver},
                       {"monotonicity_margin", mono_s.margin},
                       {"monotonicity_tolerance", mono_s.tolerance},
                       {"translation_defect", trans.defect},
                       {"translation_tolerance", trans.tolerance},
                       {"dynamic_consistency", dyn.discrepancy},
                       {"dynamic_consistency_tolerance", dyn.tolerance}};
    ok = ok && m.fraction_within_3 >= 0.95 && mono_s.pass && dyn.pass;
  }
  j["pass"] = ok;
  write_json(fs::path(f.out) / "properties.json", j);
  std::printf("properties: consistency=%.3g monotone=%zu/%zu subadditivity_gap=%+.6g %s\n",
              consistency, mono, ps.pairs, sub.gap, ok ? "pass" : "FAIL");
  return ok ? exit_ok : exit_property;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field FBSDE solver with non-convex, law-dependent control sets"};
  app.require_subcommand(1);
  Flags flags;
  std::optional<double> gap_tol;

  auto* solve = app.add_subcommand("solve", "Picard solve of the configured system");
  add_common(solve, flags, true);
  auto* ce = app.add_subcommand("counterexample", "sub-additivity counterexample");
  add_common(ce, flags, false);
  ce->add_option("--lambda", flags.lambda, "penalty weight lambda (default 2)");
  ce->add_option("--gamma", flags.gamma, "quartic weight gamma (default 1)");
  ce->add_option("--c", flags.c, "shift c (default 0.1)");
  ce->add_option("--T", flags.horizon, "horizon (default 1)");
  auto* appl = app.add_subcommand("application", "non-convex vs convexified control sets");
  add_common(appl, flags, false);
  auto* pde = app.add_subcommand("pde-check", "HJB cross-check of the particle solution");
  add_common(pde, flags, true);
  pde->add_option("--gap-tol", gap_tol, "relative gap tolerance (default 0.05)");
  auto* props = app.add_subcommand("properties", "property checks of the valuation");
  add_common(props, flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*solve)
      return cmd_solve(flags);
    if (*ce)
      return cmd_counterexample(flags);
    if (*appl)
      return cmd_application(flags);
    if (*pde)
      return cmd_pde_check(flags, gap_tol);
    return cmd_properties(flags);
  } catch (const NonContractionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_json(fs::path(flags.out) / "picard.json", to_json(e.report()));
    return exit_numerical;
  } catch (const NoConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_json(fs::path(flags.out) / "picard.json", to_json(e.report()));
    return exit_numerical;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return exit_numerical;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_usage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_usage;
  }
}
