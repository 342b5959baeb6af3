#include <gtest/gtest.h>

#include <cmath>

#include "instances.hpp"
#include "switchsolve/qvi_solver.hpp"
#include "switchsolve/regions.hpp"
#include "switchsolve/simulator.hpp"

using namespace switchsolve;
using namespace testing_instances;

namespace {

struct NeverSwitch {
  int decide(std::size_t, double) const { return kContinue; }
};

struct HysteresisFixture : ::testing::Test {
  static void SetUpTestSuite() {
    grid = build_grid(hysteresis_domain(), 800);
    sol = solve_qvi(hysteresis(), grid);
    thresholds = threshold_policy_from_regions(extract_regions(hysteresis(), sol.field, 1e-7), grid);
  }
  static SimulationParams params(std::size_t paths) {
    SimulationParams sp;
    sp.dt = 0.02;
    sp.T = 40;
    sp.n_paths = paths;
    sp.seed = 11;
    return sp;
  }
  static inline Grid grid;
  static inline Solution sol;
  static inline ThresholdPolicy thresholds;
};

}  // namespace

TEST(Simulate, NeverSwitchConstantProfitIsDeterministic) {
  const auto p = constant_profit(2, 1.5, 1, 0.7);
  SimulationParams sp;
  sp.T = 3.0;
  sp.dt = 0.013;  // does not divide T
  sp.n_paths = 50;
  const auto e = simulate(p, {-2, 2}, NeverSwitch{}, sp);
  EXPECT_NEAR(e.mean, 1.5 * (1 - std::exp(-0.7 * 3.0)) / 0.7, 3 * e.std_error + 1e-12);
  EXPECT_LE(e.std_error, 1e-14);
  EXPECT_EQ(e.mean_switches, 0.0);
}

TEST(Simulate, ParameterErrors) {
  const auto p = constant_profit(2, 1, 1, 1);
  SimulationParams sp;
  sp.T = 0.001;
  sp.dt = 0.01;
  try {
    simulate(p, {-1, 1}, NeverSwitch{}, sp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidHorizon);
  }
  sp = {};
  sp.n_paths = 1;
  try {
    simulate(p, {-1, 1}, NeverSwitch{}, sp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidPaths);
  }
}

TEST(Simulate, TailBoundFromProfitBound) {
  const auto p = hysteresis();
  SimulationParams sp;
  sp.T = 2;
  sp.n_paths = 4;
  const auto e = simulate(p, hysteresis_domain(), NeverSwitch{}, sp);
  EXPECT_DOUBLE_EQ(e.tail_bound, 6.0 * std::exp(-2.0));
}

TEST(Simulate, AbsorptionCollectsFrozenValue) {
  // Start on the edge of a Dirichlet window: the first step exits half the
  // time, so the mean sits between the running and frozen payoffs.
  auto p = constant_profit(2, 1.0, 1, 1);
  SimulationParams sp;
  sp.x0 = 1.0;
  sp.T = 5;
  sp.n_paths = 200;
  const auto e = simulate(p, {-1, 1, BoundaryMode::dirichlet_frozen}, NeverSwitch{}, sp);
  EXPECT_NEAR(e.mean, 1.0, 0.01);  // f / rho either way
}

TEST_F(HysteresisFixture, SolverPolicyMatchesValue) {
  const GridPolicyRule rule{&sol.policy, &grid};
  const auto e = simulate(hysteresis(), hysteresis_domain(), rule, params(20000));
  const double v = sol.field.values[0][grid.nearest(0)];
  EXPECT_LE(std::abs(e.mean - v), 3 * e.std_error + e.tail_bound + 0.02 * std::max(1.0, std::abs(v)));
  EXPECT_GT(e.mean_switches, 0.0);
  EXPECT_TRUE(std::isfinite(e.mean_switches));
  EXPECT_DOUBLE_EQ(e.mean_switch_cost, e.mean_switches);  // unit costs
}

TEST_F(HysteresisFixture, SeedDeterminismAndThreadIndependence) {
  const GridPolicyRule rule{&sol.policy, &grid};
  auto sp = params(600);
  sp.threads = 1;
  const auto a = simulate_paths(hysteresis(), hysteresis_domain(), rule, sp);
  sp.threads = 3;
  const auto b = simulate_paths(hysteresis(), hysteresis_domain(), rule, sp);
  EXPECT_EQ(a.payoff, b.payoff);
  EXPECT_EQ(a.switches, b.switches);
  sp.seed = 12;
  const auto c = simulate_paths(hysteresis(), hysteresis_domain(), rule, sp);
  EXPECT_NE(a.payoff, c.payoff);
}

TEST_F(HysteresisFixture, PathOrderIndependence) {
  // path q's outcome does not depend on how many paths run alongside it
  const GridPolicyRule rule{&sol.policy, &grid};
  const auto small = simulate_paths(hysteresis(), hysteresis_domain(), rule, params(50));
  const auto big = simulate_paths(hysteresis(), hysteresis_domain(), rule, params(200));
  for (std::size_t q = 0; q < 50; ++q) EXPECT_EQ(small.payoff[q], big.payoff[q]);
}

TEST_F(HysteresisFixture, ThresholdFormMatchesGridPolicy) {
  ASSERT_EQ(thresholds.rules[0].size(), 1u);
  EXPECT_DOUBLE_EQ(thresholds.rules[0][0].b, 6.0);
  EXPECT_NEAR(thresholds.rules[0][0].a, 1.1475, 1e-9);
  EXPECT_NO_THROW(thresholds.check(hysteresis_domain()));
  for (std::size_t k = 1; k + 1 < grid.size(); ++k)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(thresholds.decide(i, grid.nodes[k]), sol.policy.at(i, k));
}

TEST_F(HysteresisFixture, ScanOfItselfHasZeroDifference) {
  const GridPolicyRule rule{&sol.policy, &grid};
  const auto scan = policy_dominance_scan(hysteresis(), hysteresis_domain(), rule, {{"self", AnyRule::wrap(rule)}},
                                          params(500));
  EXPECT_EQ(scan.rows[0].diff_mean, 0.0);
  EXPECT_EQ(scan.rows[0].diff_se, 0.0);
  EXPECT_FALSE(scan.any_red_flag());
}

TEST_F(HysteresisFixture, WidenedAndAlwaysSwitchAreWorse) {
  const GridPolicyRule rule{&sol.policy, &grid};
  std::vector<NamedRule> family{
      {"widen 1", AnyRule::wrap(widen(thresholds, 1.0, hysteresis_domain()))},
      {"always", AnyRule{[](std::size_t i, double) { return int(1 - i); }}}};
  const auto scan = policy_dominance_scan(hysteresis(), hysteresis_domain(), rule, family, params(4000));
  EXPECT_LE(scan.rows[0].estimate.mean, scan.solver.mean + 3 * scan.rows[0].diff_se);
  EXPECT_TRUE(scan.rows[0].dominated);
  EXPECT_TRUE(scan.rows[1].dominated);
  EXPECT_LT(scan.rows[1].estimate.mean, -10.0);
  EXPECT_FALSE(scan.any_red_flag());
}

TEST_F(HysteresisFixture, SweepPlateauContainsSolverBoundary) {
  const GridPolicyRule rule{&sol.policy, &grid};
  std::vector<NamedRule> family;
  for (double delta : {-0.4, -0.2, 0.0, 0.2, 0.4})
    family.push_back({std::to_string(delta), AnyRule::wrap(widen(thresholds, delta, hysteresis_domain()))});
  const auto scan = policy_dominance_scan(hysteresis(), hysteresis_domain(), rule, family, params(4000));
  EXPECT_FALSE(scan.any_red_flag());
  double best = -INFINITY, best_se = 0;
  for (const auto& r : scan.rows)
    if (r.diff_mean > best) best = r.diff_mean, best_se = r.diff_se;
  // the unwidened member (the solver boundary) is within 3 paired SE of the best
  EXPECT_GE(scan.rows[2].diff_mean, best - 3 * best_se - 1e-12);
}
