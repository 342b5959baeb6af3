#pragma once

// JSON problem/run configuration.
//
//   {
//     "regimes": 2,
//     "drift":  [{"kind": "constant", "params": [0]}, ...],
//     "vol":    [...],
//     "profit": [...],
//     "costs":  [0, 1, 1, 0],                       row-major d x d
//     "rho": 1.0,
//     "state_space": {"lo": "-inf", "hi": "inf"},   optional
//     "domain": {"lo": -6, "hi": 6, "boundary_mode": "reflecting_neumann"},
//     "run": { ... }                                 optional, see RunConfig
//   }

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "switchsolve/model.hpp"
#include "switchsolve/qvi_solver.hpp"

namespace switchsolve {

struct Tolerances {
  double obstacle = 1e-7;
  double continuation = 1e-8;
  double oracle_rel = 0.02;      // of max(1, |v|)
  double simulation_rel = 0.02;  // of max(1, |v|), on top of 3 SE + tail
};

struct SimulationConfig {
  double dt = 0.02;
  std::optional<double> T;  // default 40 / rho
  std::size_t n_paths = 20000;
  std::uint64_t seed = 1;
  std::vector<double> sweep{-0.4, -0.2, 0.0, 0.2, 0.4};
};

struct OracleConfig {
  std::optional<double> dt;  // default half the largest feasible step
  double tol = 1e-12;
  long max_iters = 50'000'000;
};

struct RunConfig {
  std::size_t grid_cells = 400;
  std::optional<std::size_t> refinement_base_cells;  // default grid_cells
  int levels = 3;
  SolveParams solver;
  std::optional<double> eps_switch;  // default 10 * residual_tol
  std::optional<double> probe_x;     // default: window midpoint
  SimulationConfig simulation;
  OracleConfig oracle;
  Tolerances tolerances;
};

struct Config {
  SwitchingProblem problem;
  TruncatedDomain domain;
  RunConfig run;

  double eps_switch() const { return run.eps_switch.value_or(10.0 * run.solver.residual_tol); }
  double probe_x() const { return run.probe_x.value_or(0.5 * (domain.lo + domain.hi)); }
  double horizon() const { return run.simulation.T.value_or(40.0 / problem.rho); }
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& why) { throw Error(ErrorCode::ConfigError, why); }

inline double extended_real(const json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  config_fail(key + ": expected a number, \"inf\" or \"-inf\"");
}

inline double real(const json& j, const std::string& key) {
  if (!j.is_number()) config_fail(key + ": expected a number");
  return j.get<double>();
}

inline CoefficientSpec coefficient(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("params")) config_fail(key + ": needs kind and params");
  CoefficientSpec c;
  c.kind = coefficient_kind_from_string(j.at("kind").get<std::string>());
  c.params.clear();
  for (const auto& v : j.at("params")) c.params.push_back(real(v, key + ".params"));
  return c;
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <class T>
void maybe(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace detail

inline Config parse_config(const nlohmann::json& j) {
  using detail::config_fail;
  Config c;
  try {
    auto& p = c.problem;
    if (!j.contains("regimes")) config_fail("missing 'regimes'");
    const long d = j.at("regimes").get<long>();
    if (d < 1) config_fail("regimes must be >= 1");
    p.regimes = std::size_t(d);
    for (const char* key : {"drift", "vol", "profit"}) {
      if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != p.regimes)
        config_fail(std::string(key) + ": expected one coefficient per regime");
      auto& dst = std::string(key) == "drift" ? p.drift : std::string(key) == "vol" ? p.vol : p.profit;
      std::size_t i = 0;
      for (const auto& e : j.at(key)) dst.push_back(detail::coefficient(e, std::string(key) + "[" + std::to_string(i++) + "]"));
    }
    if (!j.contains("costs") || j.at("costs").size() != p.regimes * p.regimes)
      config_fail("costs: expected regimes*regimes entries, row-major");
    for (const auto& v : j.at("costs")) p.costs.push_back(detail::real(v, "costs"));
    for (std::size_t i = 0; i < p.regimes; ++i) p.costs[i * p.regimes + i] = 0.0;
    if (!j.contains("rho")) config_fail("missing 'rho'");
    p.rho = detail::real(j.at("rho"), "rho");
    if (j.contains("state_space")) {
      const auto& s = j.at("state_space");
      if (s.contains("lo")) p.ell = detail::extended_real(s.at("lo"), "state_space.lo");
      if (s.contains("hi")) p.r = detail::extended_real(s.at("hi"), "state_space.hi");
    }
    if (!j.contains("domain")) config_fail("missing 'domain'");
    const auto& dom = j.at("domain");
    c.domain.lo = detail::real(dom.at("lo"), "domain.lo");
    c.domain.hi = detail::real(dom.at("hi"), "domain.hi");
    if (dom.contains("boundary_mode"))
      c.domain.boundary_mode = boundary_mode_from_string(dom.at("boundary_mode").get<std::string>());

    if (j.contains("run")) {
      const auto& r = j.at("run");
      auto& run = c.run;
      detail::maybe(r, "grid_cells", run.grid_cells);
      detail::maybe(r, "refinement_base_cells", run.refinement_base_cells);
      detail::maybe(r, "levels", run.levels);
      detail::maybe(r, "eps_switch", run.eps_switch);
      detail::maybe(r, "probe_x", run.probe_x);
      if (r.contains("solver")) {
        const auto& s = r.at("solver");
        detail::maybe(s, "max_policy_iters", run.solver.max_policy_iters);
        detail::maybe(s, "linear_tol", run.solver.linear_tol);
        detail::maybe(s, "residual_tol", run.solver.residual_tol);
      }
      if (r.contains("simulation")) {
        const auto& s = r.at("simulation");
        detail::maybe(s, "dt", run.simulation.dt);
        detail::maybe(s, "T", run.simulation.T);
        detail::maybe(s, "n_paths", run.simulation.n_paths);
        detail::maybe(s, "seed", run.simulation.seed);
        detail::maybe(s, "sweep", run.simulation.sweep);
      }
      if (r.contains("oracle")) {
        const auto& s = r.at("oracle");
        detail::maybe(s, "dt", run.oracle.dt);
        detail::maybe(s, "tol", run.oracle.tol);
        detail::maybe(s, "max_iters", run.oracle.max_iters);
      }
      if (r.contains("tolerances")) {
        const auto& s = r.at("tolerances");
        detail::maybe(s, "obstacle", run.tolerances.obstacle);
        detail::maybe(s, "continuation", run.tolerances.continuation);
        detail::maybe(s, "oracle_rel", run.tolerances.oracle_rel);
        detail::maybe(s, "simulation_rel", run.tolerances.simulation_rel);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    config_fail(e.what());
  }
  const auto& run = c.run;
  if (run.grid_cells < 4 || run.levels < 1 || !(run.solver.residual_tol > 0) || !(run.solver.linear_tol > 0) ||
      run.solver.max_policy_iters < 1 || !(run.simulation.dt > 0) || run.simulation.n_paths < 2 ||
      !(run.oracle.tol > 0) || (run.eps_switch && !(*run.eps_switch > 0)))
    config_fail("run parameters must be positive (grid_cells >= 4, n_paths >= 2)");
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace switchsolve
