#include <gtest/gtest.h>

#include "instances.hpp"
#include "switchsolve/config.hpp"
#include "switchsolve/model.hpp"

using namespace switchsolve;
using namespace testing_instances;

TEST(Coefficient, AffineAtThree) { EXPECT_DOUBLE_EQ(eval_coefficient(CoefficientSpec::affine(1, 2), 3), 7.0); }

TEST(Coefficient, GeometricDriftAtTwo) {
  EXPECT_DOUBLE_EQ(eval_coefficient(CoefficientSpec::geometric(0.05), 2), 0.1);
}

TEST(Coefficient, ConstantEverywhere) {
  for (double x : {-1e6, -1.0, 0.0, 3.5, 1e9}) EXPECT_EQ(eval_coefficient(CoefficientSpec::constant(4), x), 4.0);
}

TEST(Coefficient, OrnsteinUhlenbeckPullsToMean) {
  const auto c = CoefficientSpec::ornstein_uhlenbeck(2.0, 1.0);
  EXPECT_DOUBLE_EQ(c(3.0), -4.0);
  EXPECT_DOUBLE_EQ(c(1.0), 0.0);
}

TEST(Coefficient, PiecewiseInterpolatesAndExtrapolates) {
  const auto c = CoefficientSpec::piecewise_affine({{0, 0}, {1, 2}, {3, 2}});
  EXPECT_DOUBLE_EQ(c(0.5), 1.0);
  EXPECT_DOUBLE_EQ(c(2.0), 2.0);
  EXPECT_DOUBLE_EQ(c(-1.0), -2.0);
  EXPECT_DOUBLE_EQ(c(4.0), 2.0);
  EXPECT_DOUBLE_EQ(c.lipschitz(), 2.0);
}

TEST(Coefficient, WrongParamCountThrows) {
  CoefficientSpec c{CoefficientKind::affine, {1.0}};
  EXPECT_THROW(c.check(), Error);
}

TEST(Validate, SymmetricInstancePasses) {
  auto p = constant_profit(2, 1.0, 1.0, 0.5);
  for (auto& v : p.vol) v = CoefficientSpec::constant(1);
  const auto rep = validate_problem(p, {-1, 1}, 16);
  EXPECT_TRUE(rep.ok());
  EXPECT_TRUE(rep.costs_admissible);
  EXPECT_TRUE(rep.positive_volatility);
}

TEST(Validate, TriangleViolationNamesTheTriple) {
  auto p = constant_profit(3, 0.0, 1.0, 1.0);
  p.costs = {0, 1, 5, 1, 0, 3, 1, 1, 0};
  const auto rep = validate_problem(p, {-1, 1}, 16);
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.issues.front().code, ErrorCode::TriangleViolation);
  EXPECT_EQ(rep.issues.front().i, 0);
  EXPECT_EQ(rep.issues.front().j, 1);
  EXPECT_EQ(rep.issues.front().k, 2);
  EXPECT_EQ(rep.failed_assumption(), "H4");
  EXPECT_NE(rep.issues.front().message.find("5 > "), std::string::npos);
}

TEST(Validate, VanishingVolatilityIsDegenerate) {
  auto p = constant_profit(2, 0.0, 1.0, 1.0);
  p.vol[1] = CoefficientSpec::affine(0, 1);
  const auto rep = validate_problem(p, {-1, 1}, 16);
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.issues.front().code, ErrorCode::DegenerateVolatility);
  EXPECT_EQ(rep.issues.front().i, 1);
  EXPECT_LE(rep.issues.front().x, 0.0);
  EXPECT_EQ(rep.failed_assumption(), "H2");
}

TEST(Validate, NonpositiveCostAndDiscount) {
  auto p = constant_profit(2, 0.0, 1.0, 1.0);
  p.costs[1] = 0.0;
  EXPECT_EQ(validate_problem(p, {-1, 1}).issues.front().code, ErrorCode::NonpositiveCost);
  p = constant_profit(2, 0.0, 1.0, 0.0);
  EXPECT_EQ(validate_problem(p, {-1, 1}).issues.front().code, ErrorCode::NonpositiveDiscount);
  EXPECT_THROW(validate_problem(p, {-1, 1}).throw_if_invalid(), Error);
}

TEST(Validate, ProbeCountBelowTwoRejected) {
  EXPECT_THROW(validate_problem(hysteresis(), hysteresis_domain(), 1), Error);
}

TEST(Validate, Deterministic) {
  auto p = three_regime();
  p.costs[2] = 7;
  const auto a = validate_problem(p, {-3, 3}, 33), b = validate_problem(p, {-3, 3}, 33);
  ASSERT_EQ(a.issues.size(), b.issues.size());
  for (std::size_t q = 0; q < a.issues.size(); ++q) EXPECT_EQ(a.issues[q].message, b.issues[q].message);
}

TEST(Validate, ConstantCostMatricesAlwaysAdmissible) {
  for (std::size_t d = 2; d <= 5; ++d)
    for (double c : {1e-6, 0.3, 1.0, 250.0}) EXPECT_TRUE(validate_problem(constant_profit(d, 1, c, 1), {-1, 1}).ok());
}

TEST(Validate, LabelPermutationPreservesValidity) {
  const auto p = three_regime();
  const std::vector<std::vector<std::size_t>> perms{{0, 1, 2}, {1, 0, 2}, {2, 1, 0}, {1, 2, 0}, {2, 0, 1}};
  for (const auto& perm : perms) EXPECT_TRUE(validate_problem(permuted(p, perm), {-6, 6}).ok());
  auto bad = p;
  bad.costs = {0, 1, 5, 1, 0, 3, 1, 1, 0};
  for (const auto& perm : perms) EXPECT_FALSE(validate_problem(permuted(bad, perm), {-6, 6}).ok());
}

TEST(Validate, ProfitBoundOnWindow) {
  EXPECT_DOUBLE_EQ(profit_bound(hysteresis(), hysteresis_domain()), 6.0);
}

TEST(Config, ParsesHysteresisShape) {
  const auto j = nlohmann::json::parse(R"({
    "regimes": 2,
    "drift": [{"kind": "constant", "params": [0]}, {"kind": "constant", "params": [0]}],
    "vol": [{"kind": "constant", "params": [1]}, {"kind": "constant", "params": [1]}],
    "profit": [{"kind": "affine", "params": [0, -1]}, {"kind": "affine", "params": [0, 1]}],
    "costs": [9, 1, 1, 9], "rho": 1,
    "state_space": {"lo": "-inf", "hi": "inf"},
    "domain": {"lo": -6, "hi": 6, "boundary_mode": "dirichlet_frozen"},
    "run": {"grid_cells": 123, "simulation": {"seed": 7}}})");
  const auto c = parse_config(j);
  EXPECT_EQ(c.problem.regimes, 2u);
  EXPECT_EQ(c.problem.cost(0, 0), 0.0);
  EXPECT_EQ(c.problem.costs[0], 0.0);
  EXPECT_TRUE(std::isinf(c.problem.ell) && c.problem.ell < 0);
  EXPECT_EQ(c.domain.boundary_mode, BoundaryMode::dirichlet_frozen);
  EXPECT_EQ(c.run.grid_cells, 123u);
  EXPECT_EQ(c.run.simulation.seed, 7u);
  EXPECT_DOUBLE_EQ(c.eps_switch(), 1e-7);
  EXPECT_DOUBLE_EQ(c.horizon(), 40.0);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"regimes": 2})")), Error);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"regimes": 1,
    "drift": [{"kind": "cubic", "params": [0]}], "vol": [{"kind": "constant", "params": [1]}],
    "profit": [{"kind": "constant", "params": [1]}], "costs": [0], "rho": 1, "domain": {"lo": 0, "hi": 1}})")),
               Error);
  EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}
