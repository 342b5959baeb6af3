#include <gtest/gtest.h>

#include <cmath>

#include "instances.hpp"
#include "switchsolve/mdp_oracle.hpp"
#include "switchsolve/qvi_solver.hpp"

using namespace switchsolve;
using namespace testing_instances;

namespace {

SwitchingProblem drifted(double b) {
  auto p = constant_profit(2, 1, 1, 1);
  for (auto& d : p.drift) d = CoefficientSpec::constant(b);
  for (auto& s : p.vol) s = CoefficientSpec::constant(1);
  return p;
}

}  // namespace

TEST(BuildMdp, SymmetricTrinomial) {
  const auto m = build_mdp(drifted(0), build_grid({-1, 1}, 20), 0.005);
  for (std::size_t k = 1; k < 20; ++k) {
    EXPECT_NEAR(m.p_up[0][k], 0.25, 1e-14);
    EXPECT_NEAR(m.p_down[0][k], 0.25, 1e-14);
    EXPECT_NEAR(m.p_stay[0][k], 0.5, 1e-14);
  }
}

TEST(BuildMdp, InfeasibleStepReportsNodeAndSuggestion) {
  try {
    build_mdp(drifted(0), build_grid({-1, 1}, 20), 0.02);
    FAIL();
  } catch (const InfeasibleTimestep& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleTimestep);
    EXPECT_LT(e.node(), 21u);
    EXPECT_NEAR(e.suggested_dt(), 0.01, 1e-14);
    EXPECT_NO_THROW(build_mdp(drifted(0), build_grid({-1, 1}, 20), e.suggested_dt()));
  }
}

TEST(BuildMdp, DriftMomentMatch) {
  const auto m = build_mdp(drifted(1), build_grid({-1, 1}, 20), 0.004);
  for (std::size_t k = 1; k < 20; ++k) EXPECT_NEAR(m.p_up[0][k] - m.p_down[0][k], 0.04, 1e-14);
}

TEST(BuildMdp, RowsAreProbabilityVectors) {
  const auto p = three_regime();
  const auto g = build_grid({-6, 6}, 120);
  const auto m = build_mdp(p, g, 0.9 * max_feasible_dt(p, g));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_GE(m.p_up[i][k], 0.0);
      EXPECT_GE(m.p_down[i][k], 0.0);
      EXPECT_GE(m.p_stay[i][k], 0.0);
      EXPECT_NEAR(m.p_up[i][k] + m.p_down[i][k] + m.p_stay[i][k], 1.0, 1e-14);
    }
  EXPECT_EQ(m.p_down[0][0], 0.0);
  EXPECT_EQ(m.p_up[0][120], 0.0);
}

TEST(ValueIteration, ZeroProfitIsZero) {
  auto p = drifted(0.3);
  p.profit = {CoefficientSpec::constant(0), CoefficientSpec::constant(0)};
  const auto g = build_grid({-1, 1}, 20);
  const auto r = value_iteration(build_mdp(p, g, 0.001), 1e-12, 1000);
  for (const auto& row : r.values)
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(ValueIteration, ConstantProfitGeometricSeries) {
  const double c = 2.0, rho = 1.0, dt = 0.002;
  auto p = constant_profit(2, c, 1, rho);
  const auto g = build_grid({-1, 1}, 10);
  const auto m = build_mdp(p, g, dt);
  const auto r = value_iteration(m, 1e-13, 10'000'000);
  const double want = c * dt / (1 - std::exp(-rho * dt));
  for (const auto& row : r.values)
    for (double v : row) EXPECT_NEAR(v, want, 1e-9);
  EXPECT_NEAR(want, c / rho, c * rho * dt);
}

TEST(ValueIteration, BellmanResidualBelowTol) {
  const auto p = three_regime();
  const auto g = build_grid({-6, 6}, 60);
  const auto m = build_mdp(p, g, 0.5 * max_feasible_dt(p, g));
  for (double tol : {1e-6, 1e-9, 1e-12}) {
    const auto r = value_iteration(m, tol, 10'000'000);
    EXPECT_LE(r.bellman_residual, tol);
    EXPECT_LE(bellman_residual(m, r.values), tol);
  }
}

TEST(ValueIteration, MonotoneFromZeroForNonnegativeRewards) {
  auto p = three_regime();
  p.profit = {CoefficientSpec::affine(6, -1), CoefficientSpec::affine(6, 1), CoefficientSpec::constant(5)};
  const auto g = build_grid({-6, 6}, 60);
  const auto m = build_mdp(p, g, 0.5 * max_feasible_dt(p, g));
  std::vector<std::vector<double>> prev;
  for (double tol : {1e-1, 1e-3, 1e-5, 1e-8, 1e-11}) {
    const auto r = value_iteration(m, tol, 10'000'000);
    if (!prev.empty())
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_GE(r.values[i][k], prev[i][k]);
    prev = r.values;
  }
}

TEST(ValueIteration, MaxItersExceeded) {
  const auto m = build_mdp(drifted(0), build_grid({-1, 1}, 20), 0.001);
  try {
    value_iteration(m, 1e-12, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MaxItersExceeded);
  }
}

TEST(Oracle, AgreesWithSolverAndImprovesUnderRefinement) {
  // h and dt halved together, starting from dt = h0^2 / 2 at h0 = 12/400
  const auto p = hysteresis();
  const double h0 = 12.0 / 400;
  double gaps[2];
  for (int l = 0; l < 2; ++l) {
    const auto g = build_grid(hysteresis_domain(), 400u << l);
    const auto r = value_iteration(build_mdp(p, g, 0.5 * h0 * h0 / double(1 << l)), 1e-12, 50'000'000);
    const auto s = solve_qvi(p, g);
    const std::size_t k0 = g.nearest(0);
    if (l == 0) EXPECT_NEAR(r.values[0][k0], kOracleValueAtZero400, 1e-9);
    for (std::size_t i = 0; i < 2; ++i)
      EXPECT_LE(std::abs(r.values[i][k0] - s.field.values[i][k0]), 0.02 * std::max(1.0, std::abs(s.field.values[i][k0])));
    gaps[l] = std::abs(r.values[0][k0] - s.field.values[0][k0]);
  }
  EXPECT_LE(gaps[1], 1.1 * gaps[0]);
}
