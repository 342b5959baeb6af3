#pragma once

// Brute-force cross-check: a discrete-time Markov decision process on the
// same grid, solved by plain value iteration (never by policy iteration, so
// that it shares no algorithmic path with solve_qvi).
//
// Continue in regime i at node k: reward f_i(x_k) dt, discount exp(-rho dt),
// trinomial move to k-1, k, k+1 with
//   p_up   = dt (sigma^2 / (2 h^2) + b^+ / h)
//   p_down = dt (sigma^2 / (2 h^2) + b^- / h)
// so that p_up - p_down = b dt / h exactly and the variance matches
// sigma^2 dt up to the upwind numerical diffusion. Switch to j: reward
// -g_ij, no discount, followed by a Continue in j in the same epoch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "switchsolve/discretization.hpp"
#include "switchsolve/model.hpp"

namespace switchsolve {

struct DiscreteMDP {
  Grid grid;
  std::size_t regimes = 0;
  double dt = 0.0;
  double discount = 1.0;  // exp(-rho dt)
  double rho = 1.0;
  std::vector<double> costs;  // row-major d x d
  // [i][k]
  std::vector<std::vector<double>> p_down, p_stay, p_up, reward;
  // Dirichlet mode only: value collected on absorption at the grid ends.
  std::vector<std::vector<double>> frozen;

  double cost(std::size_t i, std::size_t j) const { return i == j ? 0.0 : costs[i * regimes + j]; }
};

class InfeasibleTimestep : public Error {
 public:
  InfeasibleTimestep(std::size_t node, std::size_t regime, double suggested_dt)
      : Error(ErrorCode::InfeasibleTimestep, message(node, regime, suggested_dt)),
        node_(node), regime_(regime), suggested_dt_(suggested_dt) {}
  std::size_t node() const { return node_; }
  std::size_t regime() const { return regime_; }
  double suggested_dt() const { return suggested_dt_; }

 private:
  static std::string message(std::size_t node, std::size_t regime, double dt) {
    std::ostringstream os;
    os << "negative stay probability at node " << node << ", regime " << regime + 1 << "; use dt <= " << dt;
    return os.str();
  }
  std::size_t node_, regime_;
  double suggested_dt_;
};

/// Largest dt for which every stay probability is nonnegative.
inline double max_feasible_dt(const SwitchingProblem& p, const Grid& grid) {
  double rate = 0.0;
  for (std::size_t i = 0; i < p.regimes; ++i)
    for (double x : grid.nodes) {
      const double s = p.sigma(i, x);
      rate = std::max(rate, s * s / (grid.h * grid.h) + std::abs(p.b(i, x)) / grid.h);
    }
  return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

inline DiscreteMDP build_mdp(const SwitchingProblem& p, const Grid& grid, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  const std::size_t d = p.regimes, n = grid.size();
  const double h = grid.h;
  DiscreteMDP m;
  m.grid = grid;
  m.regimes = d;
  m.dt = dt;
  m.rho = p.rho;
  m.discount = std::exp(-p.rho * dt);
  m.costs = p.costs;
  auto sized = [&] { return std::vector<std::vector<double>>(d, std::vector<double>(n, 0.0)); };
  m.p_down = sized();
  m.p_stay = sized();
  m.p_up = sized();
  m.reward = sized();
  m.frozen = sized();
  const double suggested = max_feasible_dt(p, grid);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double x = grid.nodes[k];
      const double s = p.sigma(i, x), b = p.b(i, x);
      double up = dt * (0.5 * s * s / (h * h) + std::max(b, 0.0) / h);
      double down = dt * (0.5 * s * s / (h * h) + std::max(-b, 0.0) / h);
      if (grid.boundary_mode == BoundaryMode::reflecting_neumann) {
        // reflect the outward move back inside
        if (k == 0) up += std::exchange(down, 0.0);
        if (k + 1 == n) down += std::exchange(up, 0.0);
      }
      const double stay = 1.0 - up - down;
      if (stay < 0.0) throw InfeasibleTimestep(k, i, suggested);
      m.p_up[i][k] = up;
      m.p_down[i][k] = down;
      m.p_stay[i][k] = stay;
      m.reward[i][k] = p.f(i, x) * dt;
      m.frozen[i][k] = p.f(i, x) / p.rho;
    }
  }
  return m;
}

struct OracleResult {
  std::vector<std::vector<double>> values;  // [i][k]
  long iterations = 0;
  double bellman_residual = 0.0;  // sup-norm change of the last sweep
};

/// Jacobi value iteration from zero. Stops once a sweep changes no state by
/// more than tol; the returned values are then within tol/(1 - exp(-rho dt))
/// of the MDP's fixed point.
inline OracleResult value_iteration(const DiscreteMDP& m, double tol, long max_iters) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be > 0");
  const std::size_t d = m.regimes, n = m.grid.size();
  const bool frozen_ends = m.grid.boundary_mode == BoundaryMode::dirichlet_frozen;
  OracleResult res;
  std::vector<std::vector<double>> V(d, std::vector<double>(n, 0.0)), C = V, W = V;
  for (long it = 1; it <= max_iters; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      const auto& v = V[i];
      auto& c = C[i];
      const auto &pd = m.p_down[i], &ps = m.p_stay[i], &pu = m.p_up[i], &r = m.reward[i];
      for (std::size_t k = 0; k < n; ++k) {
        double e = ps[k] * v[k];
        if (k > 0) e += pd[k] * v[k - 1];
        if (k + 1 < n) e += pu[k] * v[k + 1];
        c[k] = r[k] + m.discount * e;
      }
      if (frozen_ends) {
        c[0] = m.frozen[i][0];
        c[n - 1] = m.frozen[i][n - 1];
      }
    }
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        double best = C[i][k];
        for (std::size_t j = 0; j < d; ++j)
          if (j != i) best = std::max(best, C[j][k] - m.cost(i, j));
        W[i][k] = best;
        change = std::max(change, std::abs(best - V[i][k]));
      }
    }
    std::swap(V, W);
    res.iterations = it;
    res.bellman_residual = change;
    if (change <= tol) {
      res.values = std::move(V);
      return res;
    }
  }
  std::ostringstream os;
  os << "value iteration did not reach tol " << tol << " in " << max_iters << " sweeps (last change "
     << res.bellman_residual << ")";
  throw Error(ErrorCode::MaxItersExceeded, os.str());
}

/// Bellman operator applied once; used to audit a returned value array.
inline double bellman_residual(const DiscreteMDP& m, const std::vector<std::vector<double>>& V) {
  const std::size_t d = m.regimes, n = m.grid.size();
  std::vector<std::vector<double>> C(d, std::vector<double>(n));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double e = m.p_stay[i][k] * V[i][k];
      if (k > 0) e += m.p_down[i][k] * V[i][k - 1];
      if (k + 1 < n) e += m.p_up[i][k] * V[i][k + 1];
      C[i][k] = m.reward[i][k] + m.discount * e;
      if (m.grid.boundary_mode == BoundaryMode::dirichlet_frozen && (k == 0 || k + 1 == n))
        C[i][k] = m.frozen[i][k];
    }
  double res = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double best = C[i][k];
      for (std::size_t j = 0; j < d; ++j)
        if (j != i) best = std::max(best, C[j][k] - m.cost(i, j));
      res = std::max(res, std::abs(best - V[i][k]));
    }
  return res;
}

}  // namespace switchsolve
