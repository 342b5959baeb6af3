#pragma once

// Subcommands of the switchsolve tool. Every command reads one JSON config
// and writes its artifacts into an output directory; the exit status encodes
// the failure class:
//
//   0 ok           1 usage / config / io     2 assumption check failed
//   3 solver did not converge                4 free boundary at the truncation edge
//   5 obstacle     6 continuation residual   7 partition
//   8 oracle gap   9 simulation gap          (verify only)

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "switchsolve/config.hpp"
#include "switchsolve/mdp_oracle.hpp"
#include "switchsolve/qvi_solver.hpp"
#include "switchsolve/regions.hpp"
#include "switchsolve/simulator.hpp"

namespace switchsolve::cli {

inline constexpr const char* kVersion = "0.1.0";

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kNoConvergence = 3,
  kBoundaryAtEdge = 4,
  kObstacle = 5,
  kContinuation = 6,
  kPartition = 7,
  kOracle = 8,
  kSimulation = 9,
};

struct Options {
  std::filesystem::path out_dir = ".";
  std::optional<double> perturb_values;  // test-only fault injection
};

using ojson = nlohmann::ordered_json;

/// Shortest round-trip decimal form of a double.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string action_label(int t) { return t == kContinue ? "C" : "S" + std::to_string(t + 1); }

/// Thrown inside commands to leave with a specific exit status.
struct ExitRequest {
  int code;
  std::string message;
};

namespace detail {

inline std::ofstream open_out(const Options& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  std::ofstream os(opt.out_dir / name, std::ios::binary);
  if (!os) throw ExitRequest{kUsage, "cannot write " + (opt.out_dir / name).string()};
  return os;
}

inline void write_json(const Options& opt, const std::string& name, const ojson& j) {
  auto os = open_out(opt, name);
  os << j.dump(2) << '\n';
}

inline void validate_or_exit(const Config& cfg) {
  const auto rep = validate_problem(cfg.problem, cfg.domain);
  if (!rep.ok()) throw ExitRequest{kValidation, "assumption " + rep.failed_assumption() + " violated: " + rep.issues.front().message};
}

struct Solved {
  Grid grid;
  Solution sol;
};

inline Solved solve_at(const Config& cfg, std::size_t cells, BoundaryMode mode) {
  TruncatedDomain dom = cfg.domain;
  dom.boundary_mode = mode;
  Solved s{build_grid(dom, cells), {}};
  try {
    s.sol = solve_qvi(cfg.problem, s.grid, cfg.run.solver);
  } catch (const MaxItersExceeded& e) {
    throw ExitRequest{kNoConvergence, e.what()};
  }
  return s;
}

inline Solved solve_main(const Config& cfg, const Options& opt) {
  auto s = solve_at(cfg, cfg.run.grid_cells, cfg.domain.boundary_mode);
  if (opt.perturb_values)
    for (auto& row : s.sol.field.values)
      for (auto& v : row) v += *opt.perturb_values;
  return s;
}

inline double value_scale(double v) { return std::max(1.0, std::abs(v)); }

struct OracleRun {
  DiscreteMDP mdp;
  OracleResult result;
};

inline OracleRun run_oracle(const Config& cfg, const Grid& grid) {
  const double dt = cfg.run.oracle.dt.value_or(0.5 * max_feasible_dt(cfg.problem, grid));
  auto mdp = build_mdp(cfg.problem, grid, dt);
  auto res = value_iteration(mdp, cfg.run.oracle.tol, cfg.run.oracle.max_iters);
  return {std::move(mdp), std::move(res)};
}

inline SimulationParams sim_params(const Config& cfg, std::size_t i0) {
  SimulationParams sp;
  sp.x0 = cfg.probe_x();
  sp.i0 = i0;
  sp.dt = cfg.run.simulation.dt;
  sp.T = cfg.horizon();
  sp.n_paths = cfg.run.simulation.n_paths;
  sp.seed = cfg.run.simulation.seed;
  return sp;
}

inline ojson estimate_json(const SimulationEstimate& e) {
  return ojson{{"mean", e.mean},
               {"std_error", e.std_error},
               {"n_paths", e.n_paths},
               {"horizon", e.horizon},
               {"tail_bound", e.tail_bound},
               {"mean_switches", e.mean_switches},
               {"mean_switch_cost", e.mean_switch_cost}};
}

}  // namespace detail

inline int cmd_solve(const Config& cfg, const Options& opt) {
  detail::validate_or_exit(cfg);
  const auto s = detail::solve_main(cfg, opt);
  const auto& f = s.sol.field;
  const std::size_t d = f.regimes();
  {
    auto os = detail::open_out(opt, "values.csv");
    os << "# switchsolve " << kVersion << '\n' << 'x';
    for (std::size_t i = 0; i < d; ++i) os << ",v_" << i + 1;
    os << '\n';
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      os << num(s.grid.nodes[k]);
      for (std::size_t i = 0; i < d; ++i) os << ',' << num(f.values[i][k]);
      os << '\n';
    }
  }
  {
    auto os = detail::open_out(opt, "policy.csv");
    os << "# switchsolve " << kVersion << '\n' << 'x';
    for (std::size_t i = 0; i < d; ++i) os << ",action_" << i + 1;
    os << '\n';
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      os << num(s.grid.nodes[k]);
      for (std::size_t i = 0; i < d; ++i) os << ',' << action_label(s.sol.policy.at(i, k));
      os << '\n';
    }
  }
  const auto& st = s.sol.stats;
  detail::write_json(opt, "stats.json",
                     ojson{{"version", kVersion},
                           {"grid_cells", s.grid.cells()},
                           {"h", s.grid.h},
                           {"iterations", st.policy_iterations},
                           {"residual", st.residual},
                           {"residual_tol", cfg.run.solver.residual_tol},
                           {"linear_residual", st.linear_residual},
                           {"cycles_broken", st.cycles_broken},
                           {"converged", st.converged},
                           {"lipschitz", st.lipschitz}});
  return kOk;
}

inline int cmd_regions(const Config& cfg, const Options& opt) {
  detail::validate_or_exit(cfg);
  const auto s = detail::solve_main(cfg, opt);
  const auto& f = s.sol.field;
  const auto rep = extract_regions(cfg.problem, f, cfg.eps_switch());
  const auto cont = continuation_residual(cfg.problem, f, rep);
  const auto tp = threshold_policy_from_regions(rep, s.grid);
  ojson regimes = ojson::array();
  for (std::size_t i = 0; i < rep.regimes.size(); ++i) {
    const auto& R = rep.regimes[i];
    ojson intervals = ojson::array();
    for (const auto& iv : tp.rules[i]) intervals.push_back({{"a", iv.a}, {"b", iv.b}, {"target", iv.target + 1}});
    ojson viol = ojson::array(), iso = ojson::array();
    for (auto k : R.partition_violations) viol.push_back(s.grid.nodes[k]);
    for (auto k : R.isolated_nodes) iso.push_back(s.grid.nodes[k]);
    regimes.push_back({{"regime", i + 1},
                       {"switch_nodes", R.switch_nodes.size()},
                       {"continuation_nodes", R.continuation_nodes.size()},
                       {"switch_intervals", intervals},
                       {"partition_violations", viol},
                       {"isolated_switch_nodes", iso},
                       {"continuation_residual", cont[i]}});
  }
  ojson bounds = ojson::array();
  for (const auto& b : rep.boundaries)
    bounds.push_back({{"regime", b.regime + 1}, {"x_star", b.x_star}, {"side", to_string(b.side)}, {"target", b.target + 1}});
  detail::write_json(opt, "regions.json",
                     ojson{{"version", kVersion},
                           {"eps_switch", rep.eps_switch},
                           {"obstacle_violation", obstacle_violation(cfg.problem, f)},
                           {"regimes", regimes},
                           {"boundaries", bounds}});
  auto os = detail::open_out(opt, "regions.csv");
  os << "# switchsolve " << kVersion << '\n' << 'x';
  for (std::size_t i = 0; i < rep.regimes.size(); ++i) os << ",region_" << i + 1;
  os << '\n';
  for (std::size_t k = 1; k + 1 < s.grid.size(); ++k) {
    os << num(s.grid.nodes[k]);
    for (const auto& R : rep.regimes) os << ',' << action_label(R.target[k]);
    os << '\n';
  }
  return kOk;
}

/// Boundaries that differ between the two boundary modes indicate that the
/// truncation, not the problem, is placing them.
inline std::optional<std::string> truncation_sensitivity(const Config& cfg, std::size_t cells) {
  const auto other = cfg.domain.boundary_mode == BoundaryMode::reflecting_neumann ? BoundaryMode::dirichlet_frozen
                                                                                  : BoundaryMode::reflecting_neumann;
  const auto a = detail::solve_at(cfg, cells, cfg.domain.boundary_mode);
  const auto b = detail::solve_at(cfg, cells, other);
  const auto ra = extract_regions(cfg.problem, a.sol.field, cfg.eps_switch());
  const auto rb = extract_regions(cfg.problem, b.sol.field, cfg.eps_switch());
  std::ostringstream why;
  for (const auto* s : {&a, &b})
    for (const auto& e : edge_boundaries(s->sol.policy, s->grid)) {
      why << "regime " << e.regime + 1 << " switches at the edge x = " << e.x_star << " under "
          << to_string(s->grid.boundary_mode);
      return why.str();
    }
  if (ra.boundaries.size() != rb.boundaries.size()) {
    why << ra.boundaries.size() << " free boundaries with " << to_string(cfg.domain.boundary_mode) << " but "
        << rb.boundaries.size() << " with " << to_string(other);
    return why.str();
  }
  for (std::size_t q = 0; q < ra.boundaries.size(); ++q) {
    const auto &x = ra.boundaries[q], &y = rb.boundaries[q];
    if (x.regime != y.regime || x.target != y.target || x.side != y.side ||
        std::abs(x.x_star - y.x_star) > 2.0 * a.grid.h) {
      why << "free boundary of regime " << x.regime + 1 << " near x = " << x.x_star << " moves with the boundary mode";
      return why.str();
    }
  }
  return std::nullopt;
}

inline int cmd_smoothfit(const Config& cfg, const Options& opt, int levels) {
  detail::validate_or_exit(cfg);
  if (levels < 2) throw ExitRequest{kUsage, "smoothfit needs at least 2 refinement levels"};
  const std::size_t base = cfg.run.refinement_base_cells.value_or(cfg.run.grid_cells);
  if (auto why = truncation_sensitivity(cfg, base)) throw ExitRequest{kBoundaryAtEdge, "truncation too narrow: " + *why};

  std::vector<std::vector<SmoothFitRecord>> per_level;
  std::vector<double> hs;
  std::vector<std::vector<double>> lips;
  for (int l = 0; l < levels; ++l) {
    const auto s = detail::solve_at(cfg, base << l, cfg.domain.boundary_mode);
    const auto rep = extract_regions(cfg.problem, s.sol.field, cfg.eps_switch());
    try {
      per_level.push_back(smooth_fit_report(s.sol.field, rep));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BoundaryAtEdge) throw ExitRequest{kBoundaryAtEdge, e.what()};
      throw;
    }
    hs.push_back(s.grid.h);
    lips.push_back(s.sol.stats.lipschitz);
  }
  for (std::size_t l = 1; l < lips.size(); ++l)
    for (std::size_t i = 0; i < lips[l].size(); ++i)
      if (lips[l][i] > 1.2 * lips[l - 1][i] && lips[l][i] > 1e-12)
        std::cerr << "warning: Lipschitz diagnostic of regime " << i + 1 << " grows under refinement ("
                  << lips[l - 1][i] << " -> " << lips[l][i] << "); the discount may be too small\n";

  const bool matched = std::all_of(per_level.begin(), per_level.end(),
                                   [&](const auto& r) { return r.size() == per_level.front().size(); });
  if (!matched) std::cerr << "warning: free-boundary count changes across levels; decay ratios omitted\n";

  auto os = detail::open_out(opt, "smoothfit.csv");
  os << "# switchsolve " << kVersion << '\n'
     << "level,h,regime,x_star,target,left_slope,right_slope,mismatch,cross_mismatch,decay_ratio\n";
  for (std::size_t l = 0; l < per_level.size(); ++l)
    for (std::size_t q = 0; q < per_level[l].size(); ++q) {
      const auto& r = per_level[l][q];
      os << l << ',' << num(hs[l]) << ',' << r.regime + 1 << ',' << num(r.x_star) << ',' << r.target + 1 << ','
         << num(r.left_slope) << ',' << num(r.right_slope) << ',' << num(r.mismatch) << ',' << num(r.cross_mismatch)
         << ',';
      if (matched && l > 0) os << num(r.mismatch / per_level[l - 1][q].mismatch);
      os << '\n';
    }
  if (matched)
    for (std::size_t q = 0; q < per_level.front().size(); ++q) {
      double worst = 0.0;
      for (std::size_t l = 1; l < per_level.size(); ++l)
        worst = std::max(worst, per_level[l][q].mismatch / per_level[l - 1][q].mismatch);
      const auto& r = per_level.back()[q];
      os << "summary,," << r.regime + 1 << ',' << num(r.x_star) << ',' << r.target + 1 << ",,," << num(r.mismatch)
         << ',' << num(r.cross_mismatch) << ',' << num(worst) << '\n';
    }
  return kOk;
}

inline int cmd_oracle(const Config& cfg, const Options& opt) {
  detail::validate_or_exit(cfg);
  const auto s = detail::solve_main(cfg, opt);
  const auto o = detail::run_oracle(cfg, s.grid);
  const auto& f = s.sol.field;
  const std::size_t d = f.regimes(), k0 = s.grid.nearest(cfg.probe_x());
  double max_gap = 0.0;
  {
    auto os = detail::open_out(opt, "oracle.csv");
    os << "# switchsolve " << kVersion << '\n' << 'x';
    for (std::size_t i = 0; i < d; ++i) os << ",mdp_" << i + 1;
    for (std::size_t i = 0; i < d; ++i) os << ",pde_" << i + 1;
    os << '\n';
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      os << num(s.grid.nodes[k]);
      for (std::size_t i = 0; i < d; ++i) os << ',' << num(o.result.values[i][k]);
      for (std::size_t i = 0; i < d; ++i) os << ',' << num(f.values[i][k]);
      os << '\n';
      for (std::size_t i = 0; i < d; ++i) max_gap = std::max(max_gap, std::abs(o.result.values[i][k] - f.values[i][k]));
    }
  }
  ojson regimes = ojson::array();
  for (std::size_t i = 0; i < d; ++i)
    regimes.push_back({{"regime", i + 1},
                       {"pde", f.values[i][k0]},
                       {"mdp", o.result.values[i][k0]},
                       {"gap", std::abs(f.values[i][k0] - o.result.values[i][k0])}});
  detail::write_json(opt, "oracle.json",
                     ojson{{"version", kVersion},
                           {"dt", o.mdp.dt},
                           {"iterations", o.result.iterations},
                           {"bellman_residual", o.result.bellman_residual},
                           {"probe_x", s.grid.nodes[k0]},
                           {"regimes", regimes},
                           {"max_gap_all_nodes", max_gap}});
  return kOk;
}

inline int cmd_simulate(const Config& cfg, const Options& opt) {
  detail::validate_or_exit(cfg);
  const auto s = detail::solve_main(cfg, opt);
  const auto& f = s.sol.field;
  const auto rep = extract_regions(cfg.problem, f, cfg.eps_switch());
  const auto tp = threshold_policy_from_regions(rep, s.grid);
  const GridPolicyRule solver_rule{&s.sol.policy, &s.grid};
  std::vector<NamedRule> family;
  for (double delta : cfg.run.simulation.sweep)
    family.push_back({"widen " + num(delta), AnyRule::wrap(widen(tp, delta, cfg.domain))});
  const std::size_t d = cfg.problem.regimes;
  family.push_back({"always_switch", AnyRule{[d](std::size_t i, double) { return int((i + 1) % d); }}});

  const std::size_t k0 = s.grid.nearest(cfg.probe_x());
  ojson starts = ojson::array();
  for (std::size_t i0 = 0; i0 < d; ++i0) {
    const auto sp = detail::sim_params(cfg, i0);
    ojson entry{{"regime", i0 + 1}, {"x0", sp.x0}, {"value", f.values[i0][k0]}};
    if (d < 2) {
      entry["solver_policy"] = detail::estimate_json(simulate(cfg.problem, cfg.domain, solver_rule, sp));
      starts.push_back(entry);
      continue;
    }
    const auto scan = policy_dominance_scan(cfg.problem, cfg.domain, solver_rule, family, sp);
    entry["solver_policy"] = detail::estimate_json(scan.solver);
    ojson rows = ojson::array();
    for (const auto& r : scan.rows)
      rows.push_back({{"name", r.name},
                      {"estimate", detail::estimate_json(r.estimate)},
                      {"diff_mean", r.diff_mean},
                      {"diff_se", r.diff_se},
                      {"beats_solver", r.beats_solver},
                      {"dominated", r.dominated}});
    entry["scan"] = rows;
    entry["red_flag"] = scan.any_red_flag();
    starts.push_back(entry);
  }
  detail::write_json(opt, "simulate.json",
                     ojson{{"version", kVersion},
                           {"dt", cfg.run.simulation.dt},
                           {"T", cfg.horizon()},
                           {"n_paths", cfg.run.simulation.n_paths},
                           {"seed", cfg.run.simulation.seed},
                           {"starts", starts}});
  return kOk;
}

inline int cmd_verify(const Config& cfg, const Options& opt) {
  detail::validate_or_exit(cfg);
  const auto s = detail::solve_main(cfg, opt);
  const auto& p = cfg.problem;
  const auto& f = s.sol.field;
  const auto& tol = cfg.run.tolerances;
  const std::size_t d = f.regimes(), k0 = s.grid.nearest(cfg.probe_x());

  const double obstacle = obstacle_violation(p, f);
  const auto rep = extract_regions(p, f, cfg.eps_switch());
  const auto cont = continuation_residual(p, f, rep);
  const double cont_max = cont.empty() ? 0.0 : *std::max_element(cont.begin(), cont.end());
  const std::size_t violations = rep.partition_violation_count();

  const auto o = detail::run_oracle(cfg, s.grid);
  ojson oracle_rows = ojson::array();
  bool oracle_ok = true;
  for (std::size_t i = 0; i < d; ++i) {
    const double gap = std::abs(f.values[i][k0] - o.result.values[i][k0]);
    const double allow = tol.oracle_rel * detail::value_scale(f.values[i][k0]);
    oracle_ok = oracle_ok && gap <= allow;
    oracle_rows.push_back({{"regime", i + 1}, {"pde", f.values[i][k0]}, {"mdp", o.result.values[i][k0]}, {"gap", gap}, {"allowed", allow}});
  }

  const GridPolicyRule rule{&s.sol.policy, &s.grid};
  ojson sim_rows = ojson::array();
  bool sim_ok = true;
  for (std::size_t i = 0; i < d; ++i) {
    const auto sp = detail::sim_params(cfg, i);
    const auto e = simulate(p, cfg.domain, rule, sp);
    const double gap = std::abs(e.mean - f.values[i][k0]);
    const double allow = 3.0 * e.std_error + e.tail_bound + tol.simulation_rel * detail::value_scale(f.values[i][k0]);
    sim_ok = sim_ok && gap <= allow;
    sim_rows.push_back({{"regime", i + 1}, {"value", f.values[i][k0]}, {"estimate", detail::estimate_json(e)}, {"gap", gap}, {"allowed", allow}});
  }

  struct Check {
    const char* name;
    bool ok;
    int code;
  };
  const Check checks[] = {{"obstacle", obstacle <= tol.obstacle, kObstacle},
                          {"continuation", cont_max <= tol.continuation, kContinuation},
                          {"partition", violations == 0, kPartition},
                          {"oracle", oracle_ok, kOracle},
                          {"simulation", sim_ok, kSimulation}};
  int code = kOk;
  for (const auto& c : checks)
    if (!c.ok && code == kOk) code = c.code;

  detail::write_json(opt, "verify.json",
                     ojson{{"version", kVersion},
                           {"probe_x", s.grid.nodes[k0]},
                           {"obstacle", {{"max_violation", obstacle}, {"allowed", tol.obstacle}, {"pass", checks[0].ok}}},
                           {"continuation", {{"max_residual", cont_max}, {"per_regime", cont}, {"allowed", tol.continuation}, {"pass", checks[1].ok}}},
                           {"partition", {{"violations", violations}, {"pass", checks[2].ok}}},
                           {"oracle", {{"dt", o.mdp.dt}, {"iterations", o.result.iterations}, {"regimes", oracle_rows}, {"pass", oracle_ok}}},
                           {"simulation", {{"regimes", sim_rows}, {"pass", sim_ok}}},
                           {"pass", code == kOk},
                           {"exit_code", code}});
  if (code != kOk) {
    for (const auto& c : checks)
      if (!c.ok) std::cerr << "verify: " << c.name << " check failed\n";
  }
  return code;
}

/// Parses argv and dispatches; returns the process exit status.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Optimal switching solver and verification suite", "switchsolve"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> levels;
  std::optional<double> perturb;
  app.add_option("--config", config_path, "problem/run config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "simulation seed override");
  app.add_option("--levels", levels, "refinement levels (smoothfit)");
  app.add_option("--perturb-values", perturb, "testing: add X to every solved value before checks");
  const char* names[][2] = {{"solve", "solve and write values.csv, policy.csv, stats.json"},
                            {"regions", "extract switching regions"},
                            {"smoothfit", "smooth-fit refinement study"},
                            {"simulate", "Monte Carlo policy evaluation and dominance scan"},
                            {"oracle", "MDP value-iteration cross-check"},
                            {"verify", "run every check and write verify.json"}};
  for (auto& n : names) app.add_subcommand(n[0], n[1]);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  const auto* sub = app.get_subcommands().front();
  try {
    Config cfg = load_config(config_path);
    if (seed) cfg.run.simulation.seed = *seed;
    if (levels) cfg.run.levels = *levels;
    Options opt{out_dir, perturb};
    const std::string name = sub->get_name();
    if (name == "solve") return cmd_solve(cfg, opt);
    if (name == "regions") return cmd_regions(cfg, opt);
    if (name == "smoothfit") return cmd_smoothfit(cfg, opt, cfg.run.levels);
    if (name == "simulate") return cmd_simulate(cfg, opt);
    if (name == "oracle") return cmd_oracle(cfg, opt);
    if (name == "verify") return cmd_verify(cfg, opt);
  } catch (const ExitRequest& e) {
    std::cerr << "switchsolve: " << e.message << '\n';
    return e.code;
  } catch (const Error& e) {
    std::cerr << "switchsolve: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::TriangleViolation:
      case ErrorCode::NonpositiveCost:
      case ErrorCode::DegenerateVolatility:
      case ErrorCode::NonpositiveDiscount:
      case ErrorCode::InvalidCoefficient:
      case ErrorCode::InvalidDomain: return kValidation;
      case ErrorCode::MaxItersExceeded:
      case ErrorCode::SingularSystem: return kNoConvergence;
      case ErrorCode::BoundaryAtEdge: return kBoundaryAtEdge;
      default: return kUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "switchsolve: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace switchsolve::cli
