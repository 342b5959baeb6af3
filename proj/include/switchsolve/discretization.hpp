#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "switchsolve/model.hpp"

namespace switchsolve {

/// Uniform grid lo = x_0 < ... < x_N = hi.
struct Grid {
  std::vector<double> nodes;
  double h = 0.0;
  BoundaryMode boundary_mode = BoundaryMode::reflecting_neumann;

  std::size_t cells() const { return nodes.size() - 1; }
  std::size_t size() const { return nodes.size(); }
  double lo() const { return nodes.front(); }
  double hi() const { return nodes.back(); }

  /// Index of the node closest to x, clamped to the grid.
  std::size_t nearest(double x) const {
    if (x <= lo()) return 0;
    if (x >= hi()) return cells();
    const auto k = static_cast<std::size_t>(std::floor((x - lo()) / h + 0.5));
    return k > cells() ? cells() : k;
  }
};

inline Grid build_grid(const TruncatedDomain& dom, std::size_t n_cells) {
  if (n_cells < 4) throw Error(ErrorCode::InvalidArgument, "n_cells must be >= 4");
  const double scale = std::max({1.0, std::abs(dom.lo), std::abs(dom.hi)});
  if (!(dom.hi - dom.lo >= 8.0 * std::numeric_limits<double>::epsilon() * scale))
    throw Error(ErrorCode::DomainTooSmall, "truncated domain is empty or below resolution");
  Grid g;
  g.boundary_mode = dom.boundary_mode;
  g.h = (dom.hi - dom.lo) / double(n_cells);
  g.nodes.resize(n_cells + 1);
  // one rounding per node, and x_k = -x_{N-k} exactly on symmetric windows
  const double n = double(n_cells);
  for (std::size_t k = 0; k <= n_cells; ++k) g.nodes[k] = (dom.lo * (n - double(k)) + dom.hi * double(k)) / n;
  return g;
}

/// Three-point approximation of L_i phi = 1/2 sigma_i^2 phi'' + b_i phi'.
/// Row k reads (L phi)(x_k) ~ low[k] phi_{k-1} + diag[k] phi_k + up[k] phi_{k+1}.
///
/// Rows 0 and N encode the boundary: with reflecting_neumann they are the
/// one-sided zero-derivative rows (row 0: (phi_1 - phi_0)/h, row N:
/// (phi_{N-1} - phi_N)/h); with dirichlet_frozen they are all zero and the
/// solver pins the node instead.
struct GeneratorStencil {
  std::vector<double> low, diag, up;
  BoundaryMode boundary_mode = BoundaryMode::reflecting_neumann;

  std::size_t size() const { return diag.size(); }

  double apply(std::span<const double> phi, std::size_t k) const {
    double s = diag[k] * phi[k];
    if (k > 0) s += low[k] * phi[k - 1];
    if (k + 1 < phi.size()) s += up[k] * phi[k + 1];
    return s;
  }
};

/// Central second difference plus upwind first difference, so that the
/// off-diagonals are nonnegative for any sign of the drift.
inline GeneratorStencil discretize_generator(const SwitchingProblem& p, std::size_t regime, const Grid& grid) {
  const std::size_t n = grid.size();
  const double h = grid.h;
  GeneratorStencil st;
  st.boundary_mode = grid.boundary_mode;
  st.low.assign(n, 0.0);
  st.diag.assign(n, 0.0);
  st.up.assign(n, 0.0);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double x = grid.nodes[k];
    const double s = p.sigma(regime, x);
    const double b = p.b(regime, x);
    const double diff = 0.5 * s * s / (h * h);
    const double up = diff + std::max(b, 0.0) / h;
    const double low = diff + std::max(-b, 0.0) / h;
    st.low[k] = low;
    st.up[k] = up;
    st.diag[k] = -(low + up);
  }
  if (grid.boundary_mode == BoundaryMode::reflecting_neumann) {
    st.diag[0] = -1.0 / h;
    st.up[0] = 1.0 / h;
    st.diag[n - 1] = -1.0 / h;
    st.low[n - 1] = 1.0 / h;
  }
  return st;
}

inline std::vector<GeneratorStencil> discretize_all(const SwitchingProblem& p, const Grid& grid) {
  std::vector<GeneratorStencil> out;
  out.reserve(p.regimes);
  for (std::size_t i = 0; i < p.regimes; ++i) out.push_back(discretize_generator(p, i, grid));
  return out;
}

}  // namespace switchsolve
