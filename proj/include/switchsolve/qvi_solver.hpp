#pragma once

// Howard policy iteration for the discrete coupled obstacle system
//
//   min{ rho v_i - L_i v_i - f_i ,  v_i - max_{j != i}(v_j - g_ij) } = 0,
//
// over the action set {Continue} u {SwitchTo(j), j != i} at every
// (regime, node). Each policy is evaluated by one sparse solve over all
// regimes at once; unknowns are ordered node-major so the system is a band
// matrix of half-width d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "switchsolve/banded.hpp"
#include "switchsolve/discretization.hpp"
#include "switchsolve/model.hpp"

namespace switchsolve {

/// values[i][k] approximates v_i(x_k).
struct ValueField {
  Grid grid;
  std::vector<std::vector<double>> values;

  std::size_t regimes() const { return values.size(); }
  double operator()(std::size_t i, std::size_t k) const { return values[i][k]; }
};

inline constexpr int kContinue = -1;

/// Per (regime, node) decision: kContinue or the target regime index.
struct Policy {
  std::size_t regimes = 0;
  std::size_t nodes = 0;
  std::vector<int> target;  // [i * nodes + k]

  Policy() = default;
  Policy(std::size_t d, std::size_t n) : regimes(d), nodes(n), target(d * n, kContinue) {}

  int& at(std::size_t i, std::size_t k) { return target[i * nodes + k]; }
  int at(std::size_t i, std::size_t k) const { return target[i * nodes + k]; }
  bool operator==(const Policy&) const = default;
};

struct SolveParams {
  int max_policy_iters = 100;
  double linear_tol = 1e-10;
  double residual_tol = 1e-8;
};

struct SolverStats {
  int policy_iterations = 0;
  double residual = 0.0;         // max |min-residual| over all rows
  double linear_residual = 0.0;  // max |A v - rhs| of the last policy solve
  int cycles_broken = 0;
  bool converged = false;
  std::vector<double> lipschitz;  // per regime
};

struct Solution {
  ValueField field;
  Policy policy;
  SolverStats stats;
};

class MaxItersExceeded : public Error {
 public:
  MaxItersExceeded(double residual, Solution partial)
      : Error(ErrorCode::MaxItersExceeded, make_message(residual)), residual_(residual), partial_(std::move(partial)) {}
  double residual() const { return residual_; }
  const Solution& partial() const { return partial_; }

 private:
  static std::string make_message(double r) {
    std::ostringstream os;
    os << "policy iteration did not converge, residual " << r;
    return os.str();
  }
  double residual_;
  Solution partial_;
};

/// Continuation-row residual at (i, k): rho v - L v - f in the interior; on
/// the boundary the zero-derivative row (v_0 - v_1)/h, (v_N - v_{N-1})/h or
/// the frozen row v - f/rho.
inline double continuation_row_residual(const SwitchingProblem& p, const GeneratorStencil& st,
                                        const ValueField& field, std::size_t i, std::size_t k) {
  const auto& v = field.values[i];
  const std::size_t n = v.size();
  const double x = field.grid.nodes[k];
  if (k == 0 || k + 1 == n) {
    if (st.boundary_mode == BoundaryMode::dirichlet_frozen) return v[k] - p.f(i, x) / p.rho;
    return -st.apply(v, k);
  }
  return p.rho * v[k] - st.apply(v, k) - p.f(i, x);
}

/// v_i - max_{j != i}(v_j - g_ij); +inf for a single regime.
inline double obstacle_gap(const SwitchingProblem& p, const ValueField& field, std::size_t i, std::size_t k) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < field.regimes(); ++j)
    if (j != i) best = std::max(best, field.values[j][k] - p.cost(i, j));
  return field.values[i][k] - best;
}

/// Pointwise min(continuation residual, obstacle gap).
inline std::vector<std::vector<double>> qvi_residual(const SwitchingProblem& p, const ValueField& field) {
  const auto stencils = discretize_all(p, field.grid);
  std::vector<std::vector<double>> res(field.regimes(), std::vector<double>(field.grid.size()));
  for (std::size_t i = 0; i < field.regimes(); ++i)
    for (std::size_t k = 0; k < field.grid.size(); ++k)
      res[i][k] = std::min(continuation_row_residual(p, stencils[i], field, i, k), obstacle_gap(p, field, i, k));
  return res;
}

inline double max_abs(const std::vector<std::vector<double>>& a) {
  double m = 0.0;
  for (const auto& row : a)
    for (double x : row) m = std::max(m, std::abs(x));
  return m;
}

/// Per-regime max |v_i(x_{k+1}) - v_i(x_k)| / h.
inline std::vector<double> lipschitz_diagnostic(const ValueField& field) {
  std::vector<double> out;
  for (const auto& v : field.values) {
    double m = 0.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) m = std::max(m, std::abs(v[k + 1] - v[k]) / field.grid.h);
    out.push_back(m);
  }
  return out;
}

/// Removes switch cycles i -> j -> ... -> i at every node by turning the
/// cheapest switch row of each cycle into Continue. Returns the number of
/// cycles broken.
inline int break_switch_cycles(const SwitchingProblem& p, Policy& pol) {
  int broken = 0;
  const std::size_t d = pol.regimes;
  std::vector<int> state(d);
  for (std::size_t k = 0; k < pol.nodes; ++k) {
    bool again = true;
    while (again) {
      again = false;
      std::fill(state.begin(), state.end(), 0);  // 0 new, 1 on stack, 2 done
      for (std::size_t s = 0; s < d && !again; ++s) {
        if (state[s] != 0) continue;
        std::vector<std::size_t> path;
        std::size_t cur = s;
        while (true) {
          if (state[cur] == 2) break;
          if (state[cur] == 1) {
            // cycle: the tail of path starting at cur
            auto it = std::find(path.begin(), path.end(), cur);
            std::size_t cheapest = *it;
            for (; it != path.end(); ++it) {
              const std::size_t r = *it;
              if (p.cost(r, std::size_t(pol.at(r, k))) < p.cost(cheapest, std::size_t(pol.at(cheapest, k))))
                cheapest = r;
            }
            pol.at(cheapest, k) = kContinue;
            ++broken;
            again = true;
            break;
          }
          state[cur] = 1;
          path.push_back(cur);
          const int t = pol.at(cur, k);
          if (t == kContinue) break;
          cur = std::size_t(t);
        }
        for (auto r : path) state[r] = 2;
      }
    }
  }
  return broken;
}

namespace detail {

inline std::size_t unknown(std::size_t d, std::size_t i, std::size_t k) { return k * d + i; }

struct PolicySystem {
  BandMatrix<double> matrix;
  std::vector<double> rhs;
};

inline PolicySystem assemble(const SwitchingProblem& p, const Grid& grid,
                             const std::vector<GeneratorStencil>& stencils, const Policy& pol) {
  const std::size_t d = p.regimes, n = grid.size();
  PolicySystem sys{BandMatrix<double>(d * n, d), std::vector<double>(d * n, 0.0)};
  auto& A = sys.matrix;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = grid.nodes[k];
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t row = unknown(d, i, k);
      const int t = pol.at(i, k);
      if (t != kContinue) {
        A(row, row) = 1.0;
        A(row, unknown(d, std::size_t(t), k)) = -1.0;
        sys.rhs[row] = -p.cost(i, std::size_t(t));
        continue;
      }
      const auto& st = stencils[i];
      const bool boundary = k == 0 || k + 1 == n;
      if (boundary && st.boundary_mode == BoundaryMode::dirichlet_frozen) {
        A(row, row) = 1.0;
        sys.rhs[row] = p.f(i, x) / p.rho;
        continue;
      }
      const double r0 = boundary ? 0.0 : p.rho;
      A(row, row) = r0 - st.diag[k];
      if (k > 0) A(row, unknown(d, i, k - 1)) = -st.low[k];
      if (k + 1 < n) A(row, unknown(d, i, k + 1)) = -st.up[k];
      sys.rhs[row] = boundary ? 0.0 : p.f(i, x);
    }
  }
  return sys;
}

}  // namespace detail

/// Solves the linear system of a fixed (acyclic) policy. linear_residual, if
/// given, receives max |A v - rhs| after one step of iterative refinement.
inline ValueField evaluate_policy(const SwitchingProblem& p, const Grid& grid,
                                  const std::vector<GeneratorStencil>& stencils, const Policy& pol,
                                  double* linear_residual = nullptr) {
  const std::size_t d = p.regimes, n = grid.size();
  auto sys = detail::assemble(p, grid, stencils, pol);
  const BandMatrix<double> original = sys.matrix;
  sys.matrix.factorize();
  std::vector<double> sol = sys.rhs;
  sys.matrix.solve_factored(sol);

  std::vector<double> r(sol.size());
  auto residual = [&] {
    original.multiply(sol, r);
    double m = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) {
      r[q] = sys.rhs[q] - r[q];
      m = std::max(m, std::abs(r[q]));
    }
    return m;
  };
  residual();
  sys.matrix.solve_factored(r);
  for (std::size_t q = 0; q < sol.size(); ++q) sol[q] += r[q];
  const double lin = residual();
  for (double v : sol)
    if (!std::isfinite(v)) throw Error(ErrorCode::SingularSystem, "non-finite solution of policy system");
  if (linear_residual) *linear_residual = lin;

  ValueField field{grid, std::vector<std::vector<double>>(d, std::vector<double>(n))};
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < d; ++i) field.values[i][k] = sol[detail::unknown(d, i, k)];
  return field;
}

/// Greedy policy from a value field. Continue wins unless some switch
/// residual is below the continuation residual by more than tie_tol; among
/// switch targets within tie_tol of the best, the smallest index wins.
inline Policy improve_policy(const SwitchingProblem& p, const std::vector<GeneratorStencil>& stencils,
                             const ValueField& field, double tie_tol) {
  const std::size_t d = p.regimes, n = field.grid.size();
  Policy pol(d, n);
  if (d < 2) return pol;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double cont = continuation_row_residual(p, stencils[i], field, i, k);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < d; ++j)
        if (j != i) best = std::min(best, field.values[i][k] - (field.values[j][k] - p.cost(i, j)));
      if (cont <= best + tie_tol) continue;
      for (std::size_t j = 0; j < d; ++j) {
        if (j == i) continue;
        if (field.values[i][k] - (field.values[j][k] - p.cost(i, j)) <= best + tie_tol) {
          pol.at(i, k) = int(j);
          break;
        }
      }
    }
  }
  return pol;
}

/// Howard iteration on one grid starting from `initial`. Stops when the
/// improved policy equals the current one.
inline Solution howard_iterate(const SwitchingProblem& p, const Grid& grid, const std::vector<GeneratorStencil>& stencils,
                               Policy initial, const SolveParams& params) {
  Solution sol;
  sol.policy = std::move(initial);
  auto& st = sol.stats;
  for (int it = 1; it <= params.max_policy_iters; ++it) {
    st.policy_iterations = it;
    st.cycles_broken += break_switch_cycles(p, sol.policy);
    sol.field = evaluate_policy(p, grid, stencils, sol.policy, &st.linear_residual);
    Policy next = improve_policy(p, stencils, sol.field, params.residual_tol);
    st.cycles_broken += break_switch_cycles(p, next);
    if (next == sol.policy) {
      st.converged = true;
      break;
    }
    sol.policy = std::move(next);
  }
  return sol;
}

/// Nearest-node transfer of a policy onto another grid of the same window.
inline Policy transfer_policy(const Policy& coarse, const Grid& coarse_grid, const Grid& fine_grid) {
  Policy out(coarse.regimes, fine_grid.size());
  for (std::size_t k = 0; k < fine_grid.size(); ++k) {
    const std::size_t kc = coarse_grid.nearest(fine_grid.nodes[k]);
    for (std::size_t i = 0; i < coarse.regimes; ++i) out.at(i, k) = coarse.at(i, kc);
  }
  return out;
}

/// Solves the discrete obstacle system by policy iteration.
///
/// Started cold, a policy iteration overshoots the switching regions on its
/// first improvement and then retreats one node per iteration, so the count
/// grows like N. The solve therefore runs on a ladder of halved grids
/// (coarsest >= 16 cells), each level warm-started from the nearest-node
/// transfer of the previous policy. stats.policy_iterations is the total
/// over all levels.
///
/// Throws MaxItersExceeded (carrying the last iterate) if the finest level
/// does not stabilise or its max |min-residual| exceeds residual_tol.
inline Solution solve_qvi(const SwitchingProblem& p, const Grid& grid, const SolveParams& params = {}) {
  if (!(params.residual_tol > 0.0) || !(params.linear_tol > 0.0) || params.max_policy_iters < 1)
    throw Error(ErrorCode::InvalidArgument, "solver tolerances must be positive");
  if (!(p.rho > 0.0)) throw Error(ErrorCode::NonpositiveDiscount, "discount rho must be > 0");

  std::vector<std::size_t> ladder{grid.cells()};
  while (ladder.back() >= 32) ladder.push_back((ladder.back() + 1) / 2);
  std::reverse(ladder.begin(), ladder.end());

  const TruncatedDomain dom{grid.lo(), grid.hi(), grid.boundary_mode};
  Policy policy(p.regimes, build_grid(dom, ladder.front()).size());
  Grid prev_grid = build_grid(dom, ladder.front());
  int total_iters = 0, cycles = 0;
  Solution sol;
  for (std::size_t level = 0; level < ladder.size(); ++level) {
    const bool finest = level + 1 == ladder.size();
    const Grid g = finest ? grid : build_grid(dom, ladder[level]);
    if (level > 0) policy = transfer_policy(policy, prev_grid, g);
    const auto stencils = discretize_all(p, g);
    sol = howard_iterate(p, g, stencils, std::move(policy), params);
    total_iters += sol.stats.policy_iterations;
    cycles += sol.stats.cycles_broken;
    policy = sol.policy;
    prev_grid = g;
  }

  auto& st = sol.stats;
  st.policy_iterations = total_iters;
  st.cycles_broken = cycles;
  st.residual = max_abs(qvi_residual(p, sol.field));
  st.converged = st.converged && st.residual <= params.residual_tol;
  st.lipschitz = lipschitz_diagnostic(sol.field);
  if (!st.converged) throw MaxItersExceeded(st.residual, sol);
  return sol;
}

}  // namespace switchsolve
