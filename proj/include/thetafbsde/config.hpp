#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "thetafbsde/coupling.hpp"
#include "thetafbsde/errors.hpp"
#include "thetafbsde/pde.hpp"
#include "thetafbsde/problem.hpp"

namespace thetafbsde {

using Json = nlohmann::json;

struct SolverSettings {
  PicardOptions picard;
  std::size_t steps = 100;
};

struct PdeSettings {
  std::optional<double> x_min, x_max;
  std::size_t nx = 241;
  std::optional<std::size_t> nt;
  HamiltonianMode mode = HamiltonianMode::driver_argmax;
  double gap_tol = 0.05; // relative Feynman-Kac gap accepted by pde-check
};

struct CounterexampleSettings {
  double lambda = 2.0;
  double gamma = 1.0;
  double c = 0.1;
  double horizon = 1.0;
  std::size_t steps = 1000;
};

struct PropertySettings {
  std::size_t pairs = 20;
  double shift = 0.1;
};

/// Everything a CLI run needs. Sections that are absent keep their defaults.
struct RunConfig {
  ProblemSpec spec;
  SolverSettings solver;
  PdeSettings pde;
  CounterexampleSettings counterexample;
  PropertySettings properties;
  bool has_problem = false;
};

namespace detail {

inline void require_keys(const Json& j, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      known = known || item.key() == a;
    if (!known)
      throw ConfigError("unknown field '" + item.key() + "' in " + where);
  }
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number())
    throw ConfigError(where + " must be a number");
  return j.get<double>();
}

inline std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError(where + " must be a non-negative integer");
  return j.get<std::size_t>();
}

inline Eigen::VectorXd vector(const Json& j, const std::string& where) {
  if (j.is_number())
    return Eigen::VectorXd::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty())
    throw ConfigError(where + " must be a non-empty array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = number(j[i], where);
  return v;
}

inline Eigen::MatrixXd matrix(const Json& j, const std::string& where) {
  if (j.is_number())
    return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(where + " must be an array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(where + " rows must all have the same length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], where);
  }
  return m;
}

inline std::string tag(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw ConfigError(where + " needs a string field '" + key + "'");
  return j[key].get<std::string>();
}

inline BaseValue parse_base(const Json& j) {
  const std::string type = tag(j, "type", "driver.f0");
  if (type == "zero") {
    require_keys(j, "driver.f0", {"type"});
    return ZeroBase{};
  }
  if (type == "linear") {
    require_keys(j, "driver.f0", {"type", "slope"});
    return LinearBase{number(j.at("slope"), "driver.f0.slope")};
  }
  if (type == "table") {
    require_keys(j, "driver.f0", {"type", "y", "f"});
    TableBase t;
    const auto y = vector(j.at("y"), "driver.f0.y");
    const auto f = vector(j.at("f"), "driver.f0.f");
    t.y.assign(y.data(), y.data() + y.size());
    t.f.assign(f.data(), f.data() + f.size());
    validate(t);
    return t;
  }
  throw ConfigError("unknown driver.f0 type '" + type + "'");
}

inline Driver parse_driver(const Json& j) {
  const std::string family = tag(j, "family", "driver");
  if (family == "quadratic_penalty") {
    require_keys(j, "driver", {"family", "kappa", "w0", "f0"});
    const BaseValue f0 = j.contains("f0") ? parse_base(j["f0"]) : BaseValue{ZeroBase{}};
    return Driver::quadratic_penalty(number(j.at("kappa"), "driver.kappa"),
                                     number(j.at("w0"), "driver.w0"), f0);
  }
  if (family == "quartic") {
    require_keys(j, "driver", {"family", "lambda", "gamma"});
    return Driver::quartic(number(j.at("lambda"), "driver.lambda"),
                           number(j.at("gamma"), "driver.gamma"));
  }
  throw ConfigError("unknown driver family '" + family + "'");
}

inline Terminal parse_terminal(const Json& j) {
  const std::string type = tag(j, "type", "terminal");
  if (type == "linear") {
    require_keys(j, "terminal", {"type", "c", "offset"});
    return LinearTerminal{vector(j.at("c"), "terminal.c"),
                          j.contains("offset") ? number(j["offset"], "terminal.offset") : 0.0};
  }
  if (type == "quadratic") {
    require_keys(j, "terminal", {"type", "q", "c", "offset"});
    QuadraticTerminal q;
    q.q = matrix(j.at("q"), "terminal.q");
    q.c = j.contains("c") ? vector(j["c"], "terminal.c") : Eigen::VectorXd::Zero(q.q.rows());
    q.offset = j.contains("offset") ? number(j["offset"], "terminal.offset") : 0.0;
    return q;
  }
  if (type == "constant") {
    require_keys(j, "terminal", {"type", "value"});
    return ConstantTerminal{number(j.at("value"), "terminal.value")};
  }
  throw ConfigError("unknown terminal type '" + type + "'");
}

inline AmbiguityMap parse_uncertainty(const Json& j) {
  require_keys(j, "uncertainty", {"intervals", "theta_rule", "theta_bounds", "endpoint_shifts"});
  const Json& list = j.at("intervals");
  if (!list.is_array() || list.empty())
    throw ConfigError("uncertainty.intervals must be a non-empty array of [lo, hi] pairs");
  std::vector<Interval> ivs;
  for (const auto& p : list) {
    if (!p.is_array() || p.size() != 2)
      throw ConfigError("each uncertainty interval must be a [lo, hi] pair");
    ivs.push_back({number(p[0], "interval lo"), number(p[1], "interval hi")});
  }
  IntervalUnion base(std::move(ivs));

  ThetaRule rule = ConstantTheta{0.0};
  if (j.contains("theta_rule")) {
    const Json& r = j["theta_rule"];
    const std::string type = tag(r, "type", "uncertainty.theta_rule");
    if (type == "constant") {
      require_keys(r, "uncertainty.theta_rule", {"type", "theta"});
      rule = ConstantTheta{r.contains("theta") ? number(r["theta"], "theta") : 0.0};
    } else if (type == "affine_moments") {
      require_keys(r, "uncertainty.theta_rule", {"type", "alpha", "beta"});
      rule = AffineMomentTheta{r.contains("alpha") ? number(r["alpha"], "alpha") : 0.0,
                               r.contains("beta") ? number(r["beta"], "beta") : 0.0};
    } else {
      throw ConfigError("unknown theta_rule type '" + type + "'");
    }
  }
  double lo = 0.0, hi = 0.0;
  if (const auto* c = std::get_if<ConstantTheta>(&rule))
    lo = hi = c->theta;
  if (j.contains("theta_bounds")) {
    const Json& b = j["theta_bounds"];
    if (!b.is_array() || b.size() != 2)
      throw ConfigError("uncertainty.theta_bounds must be [theta_min, theta_max]");
    lo = number(b[0], "theta_min");
    hi = number(b[1], "theta_max");
  }
  std::vector<EndpointShift> shifts;
  if (j.contains("endpoint_shifts")) {
    for (const auto& s : j["endpoint_shifts"]) {
      if (!s.is_array() || s.size() != 2)
        throw ConfigError("each endpoint shift must be a [lo_slope, hi_slope] pair");
      shifts.push_back({number(s[0], "lo_slope"), number(s[1], "hi_slope")});
    }
  }
  return AmbiguityMap(std::move(base), rule, std::move(shifts), lo, hi);
}

inline void parse_solver(const Json& j, SolverSettings& s) {
  require_keys(j, "solver",
               {"seed", "particles", "steps", "tol", "max_iter", "beta", "damping", "degree",
                "fixed_point_correction", "threads"});
  auto& p = s.picard;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ConfigError("solver.seed must be a non-negative integer");
    p.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("particles"))
    p.particles = count(j["particles"], "solver.particles");
  if (j.contains("steps"))
    s.steps = count(j["steps"], "solver.steps");
  if (j.contains("tol"))
    p.tol = number(j["tol"], "solver.tol");
  if (j.contains("max_iter"))
    p.max_iter = count(j["max_iter"], "solver.max_iter");
  if (j.contains("beta"))
    p.beta = number(j["beta"], "solver.beta");
  if (j.contains("damping"))
    p.damping = number(j["damping"], "solver.damping");
  if (j.contains("degree"))
    p.degree = static_cast<int>(count(j["degree"], "solver.degree"));
  if (j.contains("fixed_point_correction")) {
    if (!j["fixed_point_correction"].is_boolean())
      throw ConfigError("solver.fixed_point_correction must be a boolean");
    p.fixed_point_correction = j["fixed_point_correction"].get<bool>();
  }
  if (j.contains("threads"))
    p.threads = static_cast<unsigned>(count(j["threads"], "solver.threads"));
}

inline void parse_pde(const Json& j, PdeSettings& s) {
  require_keys(j, "pde", {"x_min", "x_max", "nx", "nt", "mode", "gap_tol"});
  if (j.contains("x_min"))
    s.x_min = number(j["x_min"], "pde.x_min");
  if (j.contains("x_max"))
    s.x_max = number(j["x_max"], "pde.x_max");
  if (j.contains("nx"))
    s.nx = count(j["nx"], "pde.nx");
  if (j.contains("nt"))
    s.nt = count(j["nt"], "pde.nt");
  if (j.contains("gap_tol"))
    s.gap_tol = number(j["gap_tol"], "pde.gap_tol");
  if (j.contains("mode")) {
    const std::string m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    if (m == "driver_argmax")
      s.mode = HamiltonianMode::driver_argmax;
    else if (m == "joint_sup")
      s.mode = HamiltonianMode::joint_sup;
    else
      throw ConfigError("pde.mode must be 'driver_argmax' or 'joint_sup'");
  }
}

inline void parse_counterexample(const Json& j, CounterexampleSettings& s) {
  require_keys(j, "counterexample", {"lambda", "gamma", "c", "T", "steps"});
  if (j.contains("lambda"))
    s.lambda = number(j["lambda"], "counterexample.lambda");
  if (j.contains("gamma"))
    s.gamma = number(j["gamma"], "counterexample.gamma");
  if (j.contains("c"))
    s.c = number(j["c"], "counterexample.c");
  if (j.contains("T"))
    s.horizon = number(j["T"], "counterexample.T");
  if (j.contains("steps"))
    s.steps = count(j["steps"], "counterexample.steps");
}

inline void parse_properties(const Json& j, PropertySettings& s) {
  require_keys(j, "properties", {"pairs", "shift"});
  if (j.contains("pairs"))
    s.pairs = count(j["pairs"], "properties.pairs");
  if (j.contains("shift"))
    s.shift = number(j["shift"], "properties.shift");
}

} // namespace detail

inline RunConfig parse_config(const Json& j) {
  detail::require_keys(j, "config",
                       {"dims", "horizon", "x0", "drift", "volatility", "driver", "terminal",
                        "uncertainty", "solver", "pde", "counterexample", "properties"});
  RunConfig cfg;
  ProblemSpec& s = cfg.spec;
  if (j.contains("dims")) {
    detail::require_keys(j["dims"], "dims", {"k", "d"});
    s.k = static_cast<int>(detail::count(j["dims"].at("k"), "dims.k"));
    s.d = static_cast<int>(detail::count(j["dims"].at("d"), "dims.d"));
  }
  if (j.contains("horizon"))
    s.horizon = detail::number(j["horizon"], "horizon");
  if (j.contains("x0"))
    s.x0 = detail::vector(j["x0"], "x0");
  if (j.contains("drift")) {
    const Json& b = j["drift"];
    detail::require_keys(b, "drift", {"family", "C0", "C1"});
    if (b.contains("family") && b["family"] != "control_affine")
      throw ConfigError("drift.family must be 'control_affine' in a config file");
    s.drift = ControlAffineDrift{detail::vector(b.at("C0"), "drift.C0"),
                                 detail::matrix(b.at("C1"), "drift.C1")};
  }
  if (j.contains("volatility")) {
    detail::require_keys(j["volatility"], "volatility", {"sigma"});
    s.volatility = ConstantVolatility{detail::matrix(j["volatility"].at("sigma"), "volatility.sigma")};
  }
  if (j.contains("driver"))
    s.driver = detail::parse_driver(j["driver"]);
  if (j.contains("terminal"))
    s.terminal = detail::parse_terminal(j["terminal"]);
  if (j.contains("uncertainty"))
    s.ambiguity = detail::parse_uncertainty(j["uncertainty"]);
  if (j.contains("solver"))
    detail::parse_solver(j["solver"], cfg.solver);
  if (j.contains("pde"))
    detail::parse_pde(j["pde"], cfg.pde);
  if (j.contains("counterexample"))
    detail::parse_counterexample(j["counterexample"], cfg.counterexample);
  if (j.contains("properties"))
    detail::parse_properties(j["properties"], cfg.properties);
  cfg.has_problem = j.contains("drift") || j.contains("driver") || j.contains("terminal");
  if (cfg.has_problem)
    s.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const Json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

} // namespace thetafbsde
