#pragma once

// Monte Carlo estimation of the discounted gain of a switching policy,
//
//   J(x, i, alpha) = E[ int_0^T e^{-rho t} f_{I_t}(X_t) dt - sum_n e^{-rho tau_n} g_{I_{n-1} I_n} ],
//
// by Euler-Maruyama on the truncated window, with an explicit bound on the
// part of the horizon beyond T.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "switchsolve/parallel.hpp"
#include "switchsolve/qvi_solver.hpp"
#include "switchsolve/regions.hpp"

namespace switchsolve {

/// Anything that maps (current regime, state) to kContinue or a target regime.
template <class R>
concept SwitchRule = requires(const R& r, std::size_t i, double x) {
  { r.decide(i, x) } -> std::convertible_to<int>;
};

/// The solver's grid policy, read at the nearest node.
struct GridPolicyRule {
  const Policy* policy;
  const Grid* grid;
  int decide(std::size_t i, double x) const { return policy->at(i, grid->nearest(x)); }
};

/// Per regime, a list of disjoint closed intervals in which to switch to a
/// fixed target.
struct ThresholdPolicy {
  struct Interval {
    double a = 0.0, b = 0.0;
    std::size_t target = 0;
  };
  std::vector<std::vector<Interval>> rules;

  int decide(std::size_t i, double x) const {
    for (const auto& r : rules[i])
      if (x >= r.a && x <= r.b) return int(r.target);
    return kContinue;
  }

  void check(const TruncatedDomain& dom) const {
    for (std::size_t i = 0; i < rules.size(); ++i) {
      auto sorted = rules[i];
      std::sort(sorted.begin(), sorted.end(), [](auto& l, auto& r) { return l.a < r.a; });
      for (std::size_t m = 0; m < sorted.size(); ++m) {
        const auto& r = sorted[m];
        if (r.target == i || r.target >= rules.size() || !(r.a <= r.b) || r.a < dom.lo || r.b > dom.hi)
          throw Error(ErrorCode::InvalidArgument, "bad switch interval for regime " + std::to_string(i + 1));
        if (m > 0 && sorted[m - 1].b >= r.a)
          throw Error(ErrorCode::InvalidArgument, "overlapping switch intervals for regime " + std::to_string(i + 1));
      }
    }
  }
};

/// Type-erased rule, for heterogeneous policy families.
struct AnyRule {
  std::function<int(std::size_t, double)> fn;
  int decide(std::size_t i, double x) const { return fn(i, x); }

  template <SwitchRule R>
  static AnyRule wrap(R rule) {
    return {[rule = std::move(rule)](std::size_t i, double x) { return rule.decide(i, x); }};
  }
};

/// Threshold form of an extracted region report: each maximal run of S_i
/// nodes with one target becomes an interval whose ends are the midpoints of
/// the flip edges, or the window ends when the run reaches the outermost
/// interior node.
inline ThresholdPolicy threshold_policy_from_regions(const RegionReport& rep, const Grid& grid) {
  ThresholdPolicy tp;
  const std::size_t n = grid.size();
  tp.rules.resize(rep.regimes.size());
  for (std::size_t i = 0; i < rep.regimes.size(); ++i) {
    const auto& R = rep.regimes[i];
    std::size_t k = 1;
    while (k + 1 < n) {
      if (!R.in_switch(k)) {
        ++k;
        continue;
      }
      std::size_t e = k;
      while (e + 2 < n && R.in_switch(e + 1) && R.target[e + 1] == R.target[k]) ++e;
      const double a = k == 1 ? grid.lo() : 0.5 * (grid.nodes[k - 1] + grid.nodes[k]);
      const double b = e + 2 == n ? grid.hi() : 0.5 * (grid.nodes[e] + grid.nodes[e + 1]);
      tp.rules[i].push_back({a, b, std::size_t(R.target[k])});
      k = e + 1;
    }
  }
  return tp;
}

/// Moves every interval end that is not on the window edge outward by delta
/// (inward for delta < 0); intervals that collapse are dropped.
inline ThresholdPolicy widen(const ThresholdPolicy& tp, double delta, const TruncatedDomain& dom) {
  ThresholdPolicy out;
  out.rules.resize(tp.rules.size());
  for (std::size_t i = 0; i < tp.rules.size(); ++i)
    for (auto r : tp.rules[i]) {
      if (r.a > dom.lo) r.a = std::clamp(r.a - delta, dom.lo, dom.hi);
      if (r.b < dom.hi) r.b = std::clamp(r.b + delta, dom.lo, dom.hi);
      if (r.a <= r.b) out.rules[i].push_back(r);
    }
  return out;
}

struct SimulationParams {
  double x0 = 0.0;
  std::size_t i0 = 0;
  double dt = 0.01;
  double T = 40.0;
  std::size_t n_paths = 20000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: worker_count()
};

struct SimulationEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  double horizon = 0.0;
  double tail_bound = 0.0;
  double mean_switches = 0.0;
  double mean_switch_cost = 0.0;  // undiscounted
};

struct PathOutcomes {
  std::vector<double> payoff;
  std::vector<double> switches;
  std::vector<double> switch_cost;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Neumaier-compensated sum in index order.
inline double compensated_sum(const std::vector<double>& xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

inline void mean_and_se(const std::vector<double>& xs, double& mean, double& se) {
  const double n = double(xs.size());
  mean = compensated_sum(xs) / n;
  std::vector<double> sq(xs.size());
  for (std::size_t q = 0; q < xs.size(); ++q) sq[q] = (xs[q] - mean) * (xs[q] - mean);
  se = xs.size() > 1 ? std::sqrt(compensated_sum(sq) / (n - 1.0) / n) : 0.0;
}

}  // namespace detail

inline void check_simulation_params(const SimulationParams& sp) {
  if (!(sp.dt > 0.0) || !(sp.T >= sp.dt) || !std::isfinite(sp.T))
    throw Error(ErrorCode::InvalidHorizon, "need dt > 0 and T >= dt");
  if (sp.n_paths < 2) throw Error(ErrorCode::InvalidPaths, "need at least 2 paths");
}

/// Simulates every path and returns per-path outcomes. Path q draws its
/// normals from a generator seeded by (seed, q), so outcomes do not depend on
/// thread count or execution order, and two policies run with the same seed
/// see the same Brownian increments.
template <SwitchRule Rule>
PathOutcomes simulate_paths(const SwitchingProblem& p, const TruncatedDomain& dom, const Rule& rule,
                            const SimulationParams& sp) {
  check_simulation_params(sp);
  if (sp.i0 >= p.regimes) throw Error(ErrorCode::InvalidArgument, "initial regime out of range");
  const auto steps = static_cast<std::size_t>(std::ceil(sp.T / sp.dt - 1e-9));
  const bool absorb = dom.boundary_mode == BoundaryMode::dirichlet_frozen;
  PathOutcomes out;
  out.payoff.assign(sp.n_paths, 0.0);
  out.switches.assign(sp.n_paths, 0.0);
  out.switch_cost.assign(sp.n_paths, 0.0);
  const double rho = p.rho;
  // per-step tables shared by all paths: discount integral over the step,
  // discount at the step end, sqrt of the step length
  std::vector<double> weight(steps), disc_end(steps), step_len(steps), sqrt_step(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t0 = double(s) * sp.dt;
    step_len[s] = std::min(sp.dt, sp.T - t0);
    weight[s] = std::exp(-rho * t0) * -std::expm1(-rho * step_len[s]) / rho;
    disc_end[s] = std::exp(-rho * (t0 + step_len[s]));
    sqrt_step[s] = std::sqrt(step_len[s]);
  }

  parallel_for(sp.n_paths, sp.threads ? sp.threads : worker_count(), [&](std::size_t q) {
    std::seed_seq seq{std::uint32_t(sp.seed), std::uint32_t(sp.seed >> 32), std::uint32_t(q),
                      std::uint32_t(std::uint64_t(q) >> 32), std::uint32_t(detail::splitmix64(sp.seed ^ q))};
    std::mt19937_64 gen(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    double x = std::clamp(sp.x0, dom.lo, dom.hi);
    std::size_t regime = sp.i0;
    double payoff = 0.0, cost_sum = 0.0, nsw = 0.0;
    auto maybe_switch = [&](double disc) {
      const int t = rule.decide(regime, x);
      if (t == kContinue || std::size_t(t) == regime) return;
      const double g = p.cost(regime, std::size_t(t));
      payoff -= disc * g;
      cost_sum += g;
      nsw += 1.0;
      regime = std::size_t(t);
    };
    maybe_switch(1.0);
    for (std::size_t s = 0; s < steps; ++s) {
      payoff += weight[s] * p.f(regime, x);
      const double z = normal(gen);
      x += p.b(regime, x) * step_len[s] + p.sigma(regime, x) * sqrt_step[s] * z;
      const double disc = disc_end[s];
      if (x < dom.lo || x > dom.hi) {
        if (absorb) {
          x = x < dom.lo ? dom.lo : dom.hi;
          maybe_switch(disc);
          payoff += disc * p.f(regime, x) / rho;
          break;
        }
        if (x < dom.lo) x = 2.0 * dom.lo - x;
        if (x > dom.hi) x = 2.0 * dom.hi - x;
        x = std::clamp(x, dom.lo, dom.hi);
      }
      maybe_switch(disc);
    }
    out.payoff[q] = payoff;
    out.switches[q] = nsw;
    out.switch_cost[q] = cost_sum;
  });
  return out;
}

inline SimulationEstimate summarize(const PathOutcomes& o, const SwitchingProblem& p, const TruncatedDomain& dom,
                                    const SimulationParams& sp) {
  SimulationEstimate e;
  detail::mean_and_se(o.payoff, e.mean, e.std_error);
  e.n_paths = o.payoff.size();
  e.horizon = sp.T;
  e.tail_bound = profit_bound(p, dom) * std::exp(-p.rho * sp.T) / p.rho;
  e.mean_switches = detail::compensated_sum(o.switches) / double(e.n_paths);
  e.mean_switch_cost = detail::compensated_sum(o.switch_cost) / double(e.n_paths);
  return e;
}

template <SwitchRule Rule>
SimulationEstimate simulate(const SwitchingProblem& p, const TruncatedDomain& dom, const Rule& rule,
                            const SimulationParams& sp) {
  return summarize(simulate_paths(p, dom, rule, sp), p, dom, sp);
}

struct DominanceRow {
  std::string name;
  SimulationEstimate estimate;
  double diff_mean = 0.0;  // heuristic minus solver, same paths
  double diff_se = 0.0;
  bool beats_solver = false;  // diff_mean > 3 diff_se: optimality red flag
  bool dominated = false;     // diff_mean < -3 diff_se
};

struct DominanceScan {
  SimulationEstimate solver;
  std::vector<DominanceRow> rows;

  bool any_red_flag() const {
    for (const auto& r : rows)
      if (r.beats_solver) return true;
    return false;
  }
};

struct NamedRule {
  std::string name;
  AnyRule rule;
};

/// Paired-seed comparison of a family of policies against the solver's.
template <SwitchRule SolverRule>
DominanceScan policy_dominance_scan(const SwitchingProblem& p, const TruncatedDomain& dom,
                                    const SolverRule& solver_rule, const std::vector<NamedRule>& family,
                                    const SimulationParams& sp) {
  if (family.empty()) throw Error(ErrorCode::InvalidArgument, "empty policy family");
  DominanceScan scan;
  const auto base = simulate_paths(p, dom, solver_rule, sp);
  scan.solver = summarize(base, p, dom, sp);
  for (const auto& member : family) {
    const auto o = simulate_paths(p, dom, member.rule, sp);
    DominanceRow row;
    row.name = member.name;
    row.estimate = summarize(o, p, dom, sp);
    std::vector<double> diff(o.payoff.size());
    for (std::size_t q = 0; q < diff.size(); ++q) diff[q] = o.payoff[q] - base.payoff[q];
    detail::mean_and_se(diff, row.diff_mean, row.diff_se);
    row.beats_solver = row.diff_mean > 3.0 * row.diff_se;
    row.dominated = row.diff_mean < -3.0 * row.diff_se;
    scan.rows.push_back(std::move(row));
  }
  return scan;
}

}  // namespace switchsolve
