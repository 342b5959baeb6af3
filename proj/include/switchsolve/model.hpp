#pragma once

// Optimal switching problem instances: regime coefficients, switching costs,
// discount, state space and its finite truncation, plus the standing
// assumption checks (Lipschitz coefficients, nondegenerate volatility,
// positive costs obeying the triangle inequality).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "switchsolve/error.hpp"

namespace switchsolve {

enum class CoefficientKind { affine, geometric, ornstein_uhlenbeck_drift, constant, piecewise_affine };

inline const char* to_string(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::affine: return "affine";
    case CoefficientKind::geometric: return "geometric";
    case CoefficientKind::ornstein_uhlenbeck_drift: return "ornstein_uhlenbeck_drift";
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::piecewise_affine: return "piecewise_affine";
  }
  return "unknown";
}

inline CoefficientKind coefficient_kind_from_string(const std::string& s) {
  if (s == "affine") return CoefficientKind::affine;
  if (s == "geometric") return CoefficientKind::geometric;
  if (s == "ornstein_uhlenbeck_drift") return CoefficientKind::ornstein_uhlenbeck_drift;
  if (s == "constant") return CoefficientKind::constant;
  if (s == "piecewise_affine") return CoefficientKind::piecewise_affine;
  throw Error(ErrorCode::InvalidCoefficient, "unknown coefficient kind '" + s + "'");
}

/// A parametric coefficient function of the state.
///
/// Parameter layout by kind:
///   affine                    [a, b]            a + b*x
///   geometric                 [b]               b*x
///   ornstein_uhlenbeck_drift  [kappa, theta]    kappa*(theta - x)
///   constant                  [c]               c
///   piecewise_affine          [x0,y0,x1,y1,...] linear interpolation through
///                             the knots, extended linearly past the ends
/// Every kind is globally Lipschitz, so the Lipschitz assumptions on the
/// coefficients hold by construction once the parameters are well formed.
struct CoefficientSpec {
  CoefficientKind kind = CoefficientKind::constant;
  std::vector<double> params{0.0};

  static CoefficientSpec affine(double a, double b) { return {CoefficientKind::affine, {a, b}}; }
  static CoefficientSpec geometric(double b) { return {CoefficientKind::geometric, {b}}; }
  static CoefficientSpec ornstein_uhlenbeck(double kappa, double theta) {
    return {CoefficientKind::ornstein_uhlenbeck_drift, {kappa, theta}};
  }
  static CoefficientSpec constant(double c) { return {CoefficientKind::constant, {c}}; }
  static CoefficientSpec piecewise_affine(const std::vector<std::pair<double, double>>& knots) {
    CoefficientSpec s{CoefficientKind::piecewise_affine, {}};
    for (auto [x, y] : knots) {
      s.params.push_back(x);
      s.params.push_back(y);
    }
    return s;
  }

  /// Throws InvalidCoefficient when the parameter list does not fit the kind.
  void check() const {
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::InvalidCoefficient, std::string(to_string(kind)) + ": " + why);
    };
    for (double p : params)
      if (!std::isfinite(p)) fail("non-finite parameter");
    std::size_t want = 0;
    switch (kind) {
      case CoefficientKind::affine: want = 2; break;
      case CoefficientKind::geometric: want = 1; break;
      case CoefficientKind::ornstein_uhlenbeck_drift: want = 2; break;
      case CoefficientKind::constant: want = 1; break;
      case CoefficientKind::piecewise_affine:
        if (params.size() < 4 || params.size() % 2 != 0) fail("needs at least two (x, y) knots");
        for (std::size_t m = 2; m < params.size(); m += 2)
          if (!(params[m] > params[m - 2])) fail("breakpoints must be strictly increasing");
        return;
    }
    if (params.size() != want)
      fail("expected " + std::to_string(want) + " parameters, got " + std::to_string(params.size()));
  }

  double operator()(double x) const {
    switch (kind) {
      case CoefficientKind::affine: return params[0] + params[1] * x;
      case CoefficientKind::geometric: return params[0] * x;
      case CoefficientKind::ornstein_uhlenbeck_drift: return params[0] * (params[1] - x);
      case CoefficientKind::constant: return params[0];
      case CoefficientKind::piecewise_affine: {
        const std::size_t n = params.size() / 2;
        std::size_t seg = 0;
        // segment index: last knot m with x_m <= x, clamped to [0, n-2]
        while (seg + 2 < n && x >= params[2 * (seg + 1)]) ++seg;
        const double x0 = params[2 * seg], y0 = params[2 * seg + 1];
        const double x1 = params[2 * seg + 2], y1 = params[2 * seg + 3];
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  /// Global Lipschitz constant implied by the kind.
  double lipschitz() const {
    switch (kind) {
      case CoefficientKind::affine: return std::abs(params[1]);
      case CoefficientKind::geometric: return std::abs(params[0]);
      case CoefficientKind::ornstein_uhlenbeck_drift: return std::abs(params[0]);
      case CoefficientKind::constant: return 0.0;
      case CoefficientKind::piecewise_affine: {
        double L = 0.0;
        for (std::size_t m = 2; m + 1 < params.size(); m += 2)
          L = std::max(L, std::abs((params[m + 1] - params[m - 1]) / (params[m] - params[m - 2])));
        return L;
      }
    }
    return 0.0;
  }

  /// sup |c(x)| over [lo, hi]. Every kind is piecewise linear, so the
  /// supremum is attained at an endpoint or at a breakpoint.
  double sup_abs(double lo, double hi) const {
    double m = std::max(std::abs((*this)(lo)), std::abs((*this)(hi)));
    if (kind == CoefficientKind::piecewise_affine)
      for (std::size_t k = 0; k < params.size(); k += 2)
        if (params[k] > lo && params[k] < hi) m = std::max(m, std::abs(params[k + 1]));
    return m;
  }
};

inline double eval_coefficient(const CoefficientSpec& spec, double x) { return spec(x); }

struct SwitchingProblem {
  std::size_t regimes = 0;
  std::vector<CoefficientSpec> drift;   // b_i
  std::vector<CoefficientSpec> vol;     // sigma_i
  std::vector<CoefficientSpec> profit;  // f_i
  std::vector<double> costs;            // row-major regimes x regimes, diagonal ignored
  double rho = 1.0;
  double ell = -std::numeric_limits<double>::infinity();
  double r = std::numeric_limits<double>::infinity();

  /// Switching cost from regime i to regime j; zero on the diagonal.
  double cost(std::size_t i, std::size_t j) const { return i == j ? 0.0 : costs[i * regimes + j]; }

  double b(std::size_t i, double x) const { return drift[i](x); }
  double sigma(std::size_t i, double x) const { return vol[i](x); }
  double f(std::size_t i, double x) const { return profit[i](x); }
};

enum class BoundaryMode { reflecting_neumann, dirichlet_frozen };

inline const char* to_string(BoundaryMode m) {
  return m == BoundaryMode::reflecting_neumann ? "reflecting_neumann" : "dirichlet_frozen";
}

inline BoundaryMode boundary_mode_from_string(const std::string& s) {
  if (s == "reflecting_neumann") return BoundaryMode::reflecting_neumann;
  if (s == "dirichlet_frozen") return BoundaryMode::dirichlet_frozen;
  throw Error(ErrorCode::ConfigError, "unknown boundary_mode '" + s + "'");
}

/// Finite window [lo, hi] of the state space on which everything is computed.
struct TruncatedDomain {
  double lo = -1.0;
  double hi = 1.0;
  BoundaryMode boundary_mode = BoundaryMode::reflecting_neumann;
};

/// One failed check. Regime indices are zero-based; messages print them
/// one-based to match the usual 1..d labelling.
struct ValidationIssue {
  ErrorCode code;
  int i = -1, j = -1, k = -1;
  double x = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

struct ValidationReport {
  bool lipschitz_coefficients = true;  // drift and volatility
  bool positive_volatility = true;
  bool lipschitz_profit = true;
  bool costs_admissible = true;  // positive, triangle inequality
  bool discount_positive = true;
  bool domain_ok = true;
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }

  /// Name of the first failed assumption group, e.g. "H4"; empty when ok.
  std::string failed_assumption() const {
    if (issues.empty()) return {};
    switch (issues.front().code) {
      case ErrorCode::TriangleViolation:
      case ErrorCode::NonpositiveCost: return "H4";
      case ErrorCode::DegenerateVolatility: return "H2";
      case ErrorCode::NonpositiveDiscount: return "discount";
      case ErrorCode::InvalidCoefficient: return issues.front().message.substr(0, 2);
      default: return "domain";
    }
  }

  void throw_if_invalid() const {
    if (!issues.empty()) throw Error(issues.front().code, issues.front().message);
  }
};

namespace detail {
inline bool coefficient_ok(const CoefficientSpec& c, std::string& why) {
  try {
    c.check();
  } catch (const Error& e) {
    why = e.what();
    return false;
  }
  return true;
}
}  // namespace detail

/// Checks the standing assumptions on a problem and its truncation.
/// Volatility positivity is probed at probe_count equispaced interior points
/// of the truncated window; the cost conditions are checked exactly.
inline ValidationReport validate_problem(const SwitchingProblem& p, const TruncatedDomain& dom,
                                         int probe_count = 64) {
  if (probe_count < 2) throw Error(ErrorCode::InvalidArgument, "probe_count must be >= 2");
  ValidationReport rep;
  auto add = [&](ValidationIssue issue) { rep.issues.push_back(std::move(issue)); };
  const auto d = p.regimes;

  if (d == 0 || p.drift.size() != d || p.vol.size() != d || p.profit.size() != d || p.costs.size() != d * d) {
    rep.domain_ok = false;
    add({ErrorCode::ConfigError, -1, -1, -1, NAN, "regime count does not match coefficient/cost arrays"});
    return rep;
  }
  if (!(p.rho > 0.0)) {
    rep.discount_positive = false;
    add({ErrorCode::NonpositiveDiscount, -1, -1, -1, NAN, "discount rho must be > 0"});
  }
  if (!(p.ell < p.r) || !(dom.lo < dom.hi) || !std::isfinite(dom.lo) || !std::isfinite(dom.hi) ||
      dom.lo < p.ell || dom.hi > p.r) {
    rep.domain_ok = false;
    add({ErrorCode::InvalidDomain, -1, -1, -1, NAN, "truncation must be a finite interval inside the state space"});
  }

  std::string why;
  for (std::size_t i = 0; i < d; ++i) {
    if (!detail::coefficient_ok(p.drift[i], why) || !detail::coefficient_ok(p.vol[i], why)) {
      rep.lipschitz_coefficients = false;
      add({ErrorCode::InvalidCoefficient, int(i), -1, -1, NAN,
           "H1: regime " + std::to_string(i + 1) + " dynamics: " + why});
    }
    if (!detail::coefficient_ok(p.profit[i], why)) {
      rep.lipschitz_profit = false;
      add({ErrorCode::InvalidCoefficient, int(i), -1, -1, NAN,
           "H3: regime " + std::to_string(i + 1) + " profit: " + why});
    }
  }

  if (rep.lipschitz_coefficients && rep.domain_ok) {
    for (std::size_t i = 0; i < d; ++i) {
      for (int m = 0; m < probe_count; ++m) {
        const double x = dom.lo + (dom.hi - dom.lo) * double(m + 1) / double(probe_count + 1);
        if (!(p.sigma(i, x) > 0.0)) {
          rep.positive_volatility = false;
          std::ostringstream os;
          os << "H2: sigma_" << i + 1 << "(" << x << ") = " << p.sigma(i, x) << " <= 0";
          add({ErrorCode::DegenerateVolatility, int(i), -1, -1, x, os.str()});
          break;
        }
      }
    }
  }

  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j && !(p.cost(i, j) > 0.0)) {
        rep.costs_admissible = false;
        std::ostringstream os;
        os << "H4: g_" << i + 1 << j + 1 << " = " << p.cost(i, j) << " is not positive";
        add({ErrorCode::NonpositiveCost, int(i), int(j), -1, NAN, os.str()});
      }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        if (i == j || j == k || i == k) continue;
        if (p.cost(i, k) > p.cost(i, j) + p.cost(j, k)) {
          rep.costs_admissible = false;
          std::ostringstream os;
          os << "H4: g_" << i + 1 << k + 1 << " = " << p.cost(i, k) << " > g_" << i + 1 << j + 1 << " + g_"
             << j + 1 << k + 1 << " = " << p.cost(i, j) + p.cost(j, k);
          add({ErrorCode::TriangleViolation, int(i), int(j), int(k), NAN, os.str()});
        }
      }
  return rep;
}

/// sup over regimes of sup |f_i| on the truncated window; the linear-growth
/// bound used for horizon-truncation tails.
inline double profit_bound(const SwitchingProblem& p, const TruncatedDomain& dom) {
  double m = 0.0;
  for (const auto& f : p.profit) m = std::max(m, f.sup_abs(dom.lo, dom.hi));
  return m;
}

}  // namespace switchsolve
