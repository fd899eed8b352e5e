#include <string>

#include <gtest/gtest.h>

#include "thetafbsde/config.hpp"

using namespace thetafbsde;

namespace {

Json application_json() {
  return Json::parse(R"({
    "dims": {"k": 1, "d": 1},
    "horizon": 1.0,
    "x0": [1.0],
    "drift": {"family": "control_affine", "C0": [0.0], "C1": [[0.25]]},
    "volatility": {"sigma": [[0.3]]},
    "driver": {"family": "quadratic_penalty", "kappa": 1.0, "w0": 0.6,
               "f0": {"type": "linear", "slope": 0.5}},
    "terminal": {"type": "linear", "c": [1.0]},
    "uncertainty": {"intervals": [[-2.0, -1.0], [1.0, 2.0]]},
    "solver": {"particles": 500, "steps": 20, "seed": 7}
  })");
}

std::string error_of(const Json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(Config, ParsesApplication) {
  const auto cfg = parse_config(application_json());
  EXPECT_TRUE(cfg.has_problem);
  EXPECT_EQ(cfg.solver.picard.particles, 500u);
  EXPECT_EQ(cfg.solver.steps, 20u);
  EXPECT_EQ(cfg.solver.picard.seed, 7u);
  EXPECT_EQ(cfg.spec.x0[0], 1.0);
  EXPECT_TRUE(cfg.spec.ambiguity.is_static());
  const auto* drv = cfg.spec.driver.as<QuadraticPenalty>();
  ASSERT_TRUE(drv);
  EXPECT_EQ(drv->w0, 0.6);
  EXPECT_EQ(project(cfg.spec.ambiguity.set_at(0.0), drv->w0).point, 1.0);
}

TEST(Config, UnknownFieldsNamed) {
  auto j = application_json();
  j["sigma_typo"] = 1.0;
  EXPECT_NE(error_of(j).find("sigma_typo"), std::string::npos);

  j = application_json();
  j["solver"]["particels"] = 3;
  EXPECT_NE(error_of(j).find("particels"), std::string::npos);

  j = application_json();
  j["driver"]["w1"] = 0.0;
  EXPECT_NE(error_of(j).find("w1"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
  auto j = application_json();
  j["driver"] = Json::parse(R"({"family": "quartic", "lambda": 1.0, "gamma": 1.0})");
  EXPECT_THROW(parse_config(j), ParameterError);

  j = application_json();
  j["driver"]["family"] = "cubic";
  EXPECT_NE(error_of(j).find("cubic"), std::string::npos);

  j = application_json();
  j["uncertainty"]["intervals"] = Json::parse("[[0, 1], [0.5, 2]]");
  EXPECT_THROW(parse_config(j), ConfigError);

  j = application_json();
  j["x0"] = Json::parse("[1.0, 2.0]");
  EXPECT_THROW(parse_config(j), ConfigError);

  j = application_json();
  j["pde"] = Json::parse(R"({"mode": "fastest"})");
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, MeanFieldRule) {
  auto j = application_json();
  j["uncertainty"] = Json::parse(R"({"intervals": [[-2, -1], [1, 2]],
      "theta_rule": {"type": "affine_moments", "alpha": 0.2, "beta": 0.0},
      "theta_bounds": [-0.4, 0.4], "endpoint_shifts": [[1, 1], [1, 1]]})");
  const auto cfg = parse_config(j);
  EXPECT_FALSE(cfg.spec.ambiguity.is_static());
  EXPECT_DOUBLE_EQ(cfg.spec.ambiguity.theta(EmpiricalMeasure({1.0})), 0.2);
}

TEST(Config, SectionsOnly) {
  const auto cfg = parse_config(Json::parse(R"({"counterexample": {"lambda": 3, "c": 0.05},
                                                 "properties": {"pairs": 5}})"));
  EXPECT_FALSE(cfg.has_problem);
  EXPECT_EQ(cfg.counterexample.lambda, 3.0);
  EXPECT_EQ(cfg.counterexample.gamma, 1.0);
  EXPECT_EQ(cfg.counterexample.c, 0.05);
  EXPECT_EQ(cfg.properties.pairs, 5u);
}

TEST(Config, TerminalAndBaseFamilies) {
  auto j = application_json();
  j["terminal"] = Json::parse(R"({"type": "quadratic", "q": [[1.0]], "c": [0.0], "offset": 2.0})");
  j["driver"]["f0"] = Json::parse(R"({"type": "table", "y": [0, 1], "f": [0, 2]})");
  const auto cfg = parse_config(j);
  const double x = 3.0;
  EXPECT_DOUBLE_EQ(evaluate(cfg.spec.terminal, std::span<const double>(&x, 1)), 11.0);
  EXPECT_DOUBLE_EQ(evaluate(cfg.spec.driver.as<QuadraticPenalty>()->f0, 0.5), 1.0);
}

TEST(Config, LoadsExampleFiles) {
  for (const char* name : {"application.json", "mean_field.json", "counterexample.json"}) {
    const std::string path = std::string(THETAFBSDE_EXAMPLES) + "/" + name;
    EXPECT_NO_THROW(load_config(path)) << path;
  }
  EXPECT_THROW(load_config(std::string(THETAFBSDE_EXAMPLES) + "/missing.json"), ConfigError);
}
