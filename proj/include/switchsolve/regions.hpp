#pragma once

// Switching / continuation regions of a solved field and the smooth-fit
// measurements at their interfaces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "switchsolve/qvi_solver.hpp"

namespace switchsolve {

/// Which side of the free boundary the switching region lies on.
enum class Side { left, right };

inline const char* to_string(Side s) { return s == Side::left ? "left" : "right"; }

struct FreeBoundary {
  std::size_t regime = 0;
  std::size_t node = 0;  // the flip edge is (node, node + 1)
  double x_star = 0.0;   // midpoint of the flip edge
  Side side = Side::right;
  std::size_t target = 0;
};

struct RegimeRegions {
  std::vector<std::size_t> switch_nodes;
  std::vector<std::size_t> continuation_nodes;
  std::vector<int> target;  // per node; kContinue outside S_i and on the grid ends
  std::vector<std::size_t> partition_violations;
  std::vector<std::size_t> isolated_nodes;  // single-node components of S_i

  bool in_switch(std::size_t k) const { return target[k] != kContinue; }
};

struct RegionReport {
  double eps_switch = 0.0;
  std::vector<RegimeRegions> regimes;
  std::vector<FreeBoundary> boundaries;

  std::size_t partition_violation_count() const {
    std::size_t n = 0;
    for (const auto& r : regimes) n += r.partition_violations.size();
    return n;
  }
  std::size_t switch_node_count() const {
    std::size_t n = 0;
    for (const auto& r : regimes) n += r.switch_nodes.size();
    return n;
  }
};

/// Node k (interior) belongs to S_i when the obstacle gap
/// v_i - max_j(v_j - g_ij) is at most eps_switch. Its target is an argmax
/// regime (within eps_switch) whose own node is in continuation; if none
/// qualifies the node is recorded as a partition violation and keeps the
/// smallest argmax target.
inline RegionReport extract_regions(const SwitchingProblem& p, const ValueField& field, double eps_switch) {
  if (!(eps_switch > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps_switch must be > 0");
  const std::size_t d = field.regimes(), n = field.grid.size();
  RegionReport rep;
  rep.eps_switch = eps_switch;
  rep.regimes.resize(d);

  std::vector<std::vector<double>> gap(d, std::vector<double>(n));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < n; ++k) gap[i][k] = obstacle_gap(p, field, i, k);

  for (std::size_t i = 0; i < d; ++i) {
    auto& R = rep.regimes[i];
    R.target.assign(n, kContinue);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (!(gap[i][k] <= eps_switch)) {
        R.continuation_nodes.push_back(k);
        continue;
      }
      R.switch_nodes.push_back(k);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < d; ++j)
        if (j != i) best = std::max(best, field.values[j][k] - p.cost(i, j));
      int first = kContinue, chosen = kContinue;
      for (std::size_t j = 0; j < d; ++j) {
        if (j == i || field.values[j][k] - p.cost(i, j) < best - eps_switch) continue;
        if (first == kContinue) first = int(j);
        if (gap[j][k] > eps_switch) {
          chosen = int(j);
          break;
        }
      }
      if (chosen == kContinue) {
        R.partition_violations.push_back(k);
        chosen = first;
      }
      R.target[k] = chosen;
    }
    for (std::size_t k : R.switch_nodes)
      if (!R.in_switch(k - 1) && !R.in_switch(k + 1)) R.isolated_nodes.push_back(k);
    for (std::size_t k = 1; k + 2 < n; ++k) {
      const bool a = R.in_switch(k), b = R.in_switch(k + 1);
      if (a == b) continue;
      FreeBoundary fb;
      fb.regime = i;
      fb.node = k;
      fb.x_star = 0.5 * (field.grid.nodes[k] + field.grid.nodes[k + 1]);
      fb.side = b ? Side::right : Side::left;
      fb.target = std::size_t(b ? R.target[k + 1] : R.target[k]);
      rep.boundaries.push_back(fb);
    }
  }
  return rep;
}

struct SmoothFitRecord {
  std::size_t regime = 0;
  double x_star = 0.0;
  std::size_t target = 0;
  Side side = Side::right;
  double h = 0.0;
  double left_slope = 0.0;    // from nodes (k-1, k)
  double right_slope = 0.0;   // from nodes (k+1, k+2)
  double mismatch = 0.0;      // |left - right|
  double target_slope = 0.0;  // v_j' across the flip edge
  double cross_mismatch = 0.0;  // |v_i' - v_j'| on the continuation side of S_i
  double curvature = 0.0;       // max |second difference| / h^2 of v_i, v_j near x*
  bool sandwich_ok = true;      // v'_{i,-} <= v_j' <= v'_{i,+} within 2 h curvature
};

/// One-sided difference quotients at every free boundary in the report.
/// Throws BoundaryAtEdge when a boundary sits so close to the end of the
/// grid that the quotients would read boundary-row nodes.
inline std::vector<SmoothFitRecord> smooth_fit_report(const ValueField& field, const RegionReport& report) {
  std::vector<SmoothFitRecord> out;
  const std::size_t n = field.grid.size();
  const double h = field.grid.h;
  for (const auto& fb : report.boundaries) {
    const std::size_t k = fb.node;
    if (k < 2 || k + 3 > n - 1)
      throw Error(ErrorCode::BoundaryAtEdge, "free boundary of regime " + std::to_string(fb.regime + 1) +
                                                 " at x = " + std::to_string(fb.x_star) +
                                                 " touches the truncation edge; widen the domain");
    const auto& v = field.values[fb.regime];
    const auto& w = field.values[fb.target];
    SmoothFitRecord r;
    r.regime = fb.regime;
    r.x_star = fb.x_star;
    r.target = fb.target;
    r.side = fb.side;
    r.h = h;
    r.left_slope = (v[k] - v[k - 1]) / h;
    r.right_slope = (v[k + 2] - v[k + 1]) / h;
    r.mismatch = std::abs(r.left_slope - r.right_slope);
    r.target_slope = (w[k + 1] - w[k]) / h;
    if (fb.side == Side::right)
      r.cross_mismatch = std::abs(r.left_slope - (w[k] - w[k - 1]) / h);
    else
      r.cross_mismatch = std::abs(r.right_slope - (w[k + 2] - w[k + 1]) / h);
    for (std::size_t m = k - 1; m <= k + 2; ++m)
      r.curvature = std::max({r.curvature, std::abs(v[m + 1] - 2.0 * v[m] + v[m - 1]) / (h * h),
                              std::abs(w[m + 1] - 2.0 * w[m] + w[m - 1]) / (h * h)});
    const double slack = 2.0 * h * r.curvature;
    r.sandwich_ok = r.left_slope - slack <= r.target_slope && r.target_slope <= r.right_slope + slack;
    out.push_back(r);
  }
  return out;
}

/// Switches the policy takes on a grid end while the neighbouring interior
/// node continues: the free boundary sits on the truncation edge itself.
inline std::vector<FreeBoundary> edge_boundaries(const Policy& pol, const Grid& grid) {
  std::vector<FreeBoundary> out;
  const std::size_t n = grid.cells();
  for (std::size_t i = 0; i < pol.regimes; ++i) {
    if (pol.at(i, 0) != kContinue && pol.at(i, 1) == kContinue)
      out.push_back({i, 0, grid.nodes[0], Side::left, std::size_t(pol.at(i, 0))});
    if (pol.at(i, n) != kContinue && pol.at(i, n - 1) == kContinue)
      out.push_back({i, n - 1, grid.nodes[n], Side::right, std::size_t(pol.at(i, n))});
  }
  return out;
}

/// Per regime, max |rho v_i - L_i v_i - f_i| over continuation nodes that
/// have no neighbour in S_i.
inline std::vector<double> continuation_residual(const SwitchingProblem& p, const ValueField& field,
                                                 const RegionReport& report) {
  const auto stencils = discretize_all(p, field.grid);
  std::vector<double> out(field.regimes(), 0.0);
  for (std::size_t i = 0; i < field.regimes(); ++i) {
    const auto& R = report.regimes[i];
    for (std::size_t k : R.continuation_nodes) {
      if (R.in_switch(k - 1) || R.in_switch(k + 1)) continue;
      out[i] = std::max(out[i], std::abs(continuation_row_residual(p, stencils[i], field, i, k)));
    }
  }
  return out;
}

/// Largest obstacle violation max_i,k max_j (v_j - g_ij) - v_i, floored at 0.
inline double obstacle_violation(const SwitchingProblem& p, const ValueField& field) {
  double m = 0.0;
  for (std::size_t i = 0; i < field.regimes(); ++i)
    for (std::size_t k = 0; k < field.grid.size(); ++k) m = std::max(m, -obstacle_gap(p, field, i, k));
  return m;
}

}  // namespace switchsolve
