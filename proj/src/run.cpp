#include "degdiff/run.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "degdiff/analysis.hpp"
#include "degdiff/csv.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/experiments.hpp"
#include "degdiff/fem.hpp"
#include "degdiff/graphs.hpp"
#include "degdiff/linalg.hpp"
#include "degdiff/solver.hpp"

namespace degdiff {
namespace {

using config::Command;
using config::RunConfig;

// Slack below the theoretical slope tolerated by --assert.
constexpr double kEpsSlopeTol = 0.1;
constexpr double kKappaSlopeTol = 0.2;
constexpr double kFluxTol = 1e-10;
constexpr double kAuditRatio = 10.0;

experiments::Scenario build_scenario(const RunConfig& cfg) {
  auto scn = experiments::make_scenario(*cfg.scenario, cfg.kappa);
  if (cfg.graph) scn.graph = graphs::parse_graph(*cfg.graph);
  if (cfg.pi) scn.pi = graphs::parse_pi(*cfg.pi);
  if (cfg.route) scn.route = *cfg.route == "A4" ? experiments::Route::a4 : experiments::Route::a6;
  scn.validate();
  return scn;
}

experiments::Discretization build_disc(const RunConfig& cfg, int jobs) {
  experiments::Discretization d;
  d.n_cells = cfg.n_cells;
  d.tau = cfg.tau;
  d.T = cfg.T;
  d.lambda_ref = cfg.lambda_ref;
  d.newton_tol = cfg.newton_tol;
  d.newton_max = cfg.newton_max;
  d.jobs = std::max(1, jobs);
  return d;
}

std::string output_path(const RunConfig& cfg, const RunOptions& opts) {
  if (opts.out) return *opts.out;
  if (cfg.output) return *cfg.output;
  return fmt::format("{}.csv", config::command_name(cfg.command));
}

struct Outcome {
  std::string summary;
  bool within_threshold = true;
};

Outcome run_solve(const RunConfig& cfg, const std::string& path) {
  const auto scn = build_scenario(cfg);
  const fem::Mesh1D mesh(scn.a, scn.b, cfg.n_cells);
  solver::Trajectory traj;
  double balance = 0.0;
  std::string detail;
  if (cfg.model == "ch") {
    solver::ChParams p;
    p.eps = cfg.eps;
    p.lambda = cfg.lambda.value_or(std::min(graphs::lambda_bar(scn.graph), cfg.eps * cfg.eps));
    p.kappa = scn.kappa;
    p.tau = cfg.tau;
    p.T = cfg.T;
    p.graph = scn.graph;
    p.pi = scn.pi;
    p.newton_tol = cfg.newton_tol;
    p.newton_max = cfg.newton_max;
    p.validate();
    const fem::FemOperators ops(mesh, scn.kappa);
    const auto u0e = solver::initial_smoothing(ops, scn.initial(mesh), p.eps);
    traj = solver::march_ch(ops, p, u0e, solver::make_forcing(ops, scn.bulk(mesh), scn.boundary()));
    balance = analysis::ch_flux_balance(ops, traj);
    detail = fmt::format("eps={} lambda={}", p.eps, p.lambda);
  } else {
    solver::LimitParams p;
    p.scheme = cfg.model == "robin" ? solver::BoundaryScheme::robin : solver::BoundaryScheme::neumann;
    p.graph = scn.graph;
    p.lambda_ref = cfg.lambda_ref;
    p.tau = cfg.tau;
    p.T = cfg.T;
    p.newton_tol = cfg.newton_tol;
    p.newton_max = cfg.newton_max;
    p.validate();
    const fem::FemOperators ops(mesh, p.scheme == solver::BoundaryScheme::robin ? scn.kappa : 0.0);
    traj = solver::limit_march(ops, p, scn.bulk(mesh), scn.boundary(), scn.initial(mesh));
    balance = analysis::limit_flux_balance(ops, traj, p.scheme, scn.bulk(mesh), scn.boundary());
    detail = fmt::format("kappa={}", p.scheme == solver::BoundaryScheme::robin ? scn.kappa : 0.0);
  }
  csv::write_atomic(path, [&](std::ostream& o) { solver::write_trajectory_csv(o, mesh, traj); });
  Outcome oc;
  oc.within_threshold = balance <= kFluxTol;
  oc.summary = fmt::format("solve {} model={} {} steps={} max_newton={} flux_balance={:.3e} -> {}",
                           scn.id, cfg.model, detail, traj.num_steps(), traj.max_newton_iterations,
                           balance, path);
  return oc;
}

std::string slope_text(const analysis::ConvergenceRecord& rec) {
  return rec.fitted ? fmt::format("slope={:.4f} r2={:.4f}", rec.fit.slope, rec.fit.r2) : "slope=n/a";
}

Outcome run_sweep(const RunConfig& cfg, const RunOptions& opts, const std::string& path) {
  const auto scn = build_scenario(cfg);
  const auto disc = build_disc(cfg, opts.jobs);
  analysis::ConvergenceRecord rec;
  Outcome oc;
  switch (cfg.command) {
    case Command::sweep_eps:
      rec = experiments::sweep_eps(scn, disc, cfg.eps_list);
      oc.within_threshold = rec.monotone && rec.fitted && rec.fit.slope >= rec.expected_slope - kEpsSlopeTol;
      break;
    case Command::sweep_kappa:
      rec = experiments::sweep_kappa(scn, disc, cfg.kappa_list);
      oc.within_threshold = rec.monotone && rec.fitted && rec.fit.slope >= rec.expected_slope - kKappaSlopeTol;
      break;
    default:
      rec = experiments::sweep_lambda(scn, disc, cfg.eps, cfg.lambda_list);
      oc.within_threshold = rec.monotone;
      break;
  }
  csv::write_atomic(path, [&](std::ostream& o) { analysis::write_convergence_csv(o, rec); });
  std::string expected = rec.param_name == "lambda" ? "" : fmt::format(" expected={:.4f}", rec.expected_slope);
  oc.summary = fmt::format("{} {} points={} {}{} monotone={} -> {}", rec.sweep_id, scn.id,
                           rec.params.size(), slope_text(rec), expected, rec.monotone ? "yes" : "no", path);
  return oc;
}

Outcome run_audit(const RunConfig& cfg, const RunOptions& opts, const std::string& path) {
  const auto scn = build_scenario(cfg);
  const auto rep = experiments::uniform_bound_audit(scn, build_disc(cfg, opts.jobs), cfg.eps_list,
                                                    cfg.lambda_list);
  csv::write_atomic(path, [&](std::ostream& o) {
    analysis::write_energy_header(o);
    for (const auto& c : rep.cells) {
      if (c.report) analysis::write_energy_row(o, scn.id, c.eps, c.lambda, *c.report);
    }
  });
  for (const auto& c : rep.cells) {
    if (!c.report) throw SolverError(fmt::format("audit cell eps={} lambda={}: {}", c.eps, c.lambda, c.error), 0.0, 0);
  }
  std::size_t worst = 0;
  for (std::size_t f = 1; f < rep.ratios.size(); ++f) {
    if (rep.ratios[f] > rep.ratios[worst]) worst = f;
  }
  Outcome oc;
  oc.within_threshold = rep.passes(kAuditRatio);
  oc.summary = fmt::format("audit {} route={} cells={} max_ratio={:.4f} worst_field={} -> {}", scn.id,
                           experiments::route_name(rep.route), rep.cells.size(), rep.max_ratio,
                           analysis::EnergyReport::kFieldNames[worst], path);
  return oc;
}

Outcome run_uniqueness(const RunConfig& cfg, const RunOptions& opts, const std::string& path) {
  const auto scn = build_scenario(cfg);
  const auto res = experiments::uniqueness_probe(scn, build_disc(cfg, opts.jobs), cfg.eps,
                                                 cfg.lambda_list, cfg.lambda_list_b);
  csv::write_atomic(path, [&](std::ostream& o) {
    o << "scenario,eps,lambda_a,lambda_b,deviation,cauchy_gap,within_bound\n";
    fmt::print(o, "{},{},{},{},{},{},{}\n", scn.id, cfg.eps, cfg.lambda_list.back(),
               cfg.lambda_list_b.back(), res.deviation, res.cauchy_gap, res.within_bound ? 1 : 0);
  });
  Outcome oc;
  oc.within_threshold = res.within_bound;
  oc.summary = fmt::format("uniqueness {} deviation={:.3e} cauchy_gap={:.3e} ratio={:.3f} -> {}", scn.id,
                           res.deviation, res.cauchy_gap,
                           res.cauchy_gap > 0.0 ? res.deviation / res.cauchy_gap : 0.0, path);
  return oc;
}

Outcome run_graph_table(const RunConfig& cfg, const RunOptions& opts, std::ostream& out) {
  const auto g = graphs::parse_graph(*cfg.graph);
  const double lambda = *cfg.lambda;
  struct Row {
    double r, j, b, env, hat;
  };
  std::vector<Row> rows;
  for (double r : cfg.r_list) {
    rows.push_back({r, graphs::resolvent(g, lambda, r), graphs::yosida(g, lambda, r),
                    graphs::moreau_yosida(g, lambda, r), graphs::hat_beta(g, r)});
  }
  fmt::print(out, "# graph={} lambda={}\n", g.id(), lambda);
  fmt::print(out, "{:>12} {:>14} {:>14} {:>14} {:>14}\n", "r", "J_lambda", "beta_lambda",
             "hat_beta_lambda", "hat_beta");
  for (const auto& row : rows) {
    fmt::print(out, "{:>12.6g} {:>14.8g} {:>14.8g} {:>14.8g} {:>14.8g}\n", row.r, row.j, row.b, row.env,
               row.hat);
  }
  Outcome oc;
  if (cfg.output || opts.out) {
    const auto path = output_path(cfg, opts);
    csv::write_atomic(path, [&](std::ostream& o) {
      o << "r,J_lambda,beta_lambda,hat_beta_lambda,hat_beta\n";
      for (const auto& row : rows) fmt::print(o, "{},{},{},{},{}\n", row.r, row.j, row.b, row.env, row.hat);
    });
    oc.summary = fmt::format("graph-table {} rows={} -> {}", g.id(), rows.size(), path);
  } else {
    oc.summary = fmt::format("graph-table {} rows={}", g.id(), rows.size());
  }
  return oc;
}

}  // namespace

int run(const RunConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    Outcome oc;
    const auto path = output_path(cfg, opts);
    switch (cfg.command) {
      case Command::solve: oc = run_solve(cfg, path); break;
      case Command::sweep_eps:
      case Command::sweep_lambda:
      case Command::sweep_kappa: oc = run_sweep(cfg, opts, path); break;
      case Command::audit: oc = run_audit(cfg, opts, path); break;
      case Command::uniqueness: oc = run_uniqueness(cfg, opts, path); break;
      case Command::graph_table: oc = run_graph_table(cfg, opts, out); break;
    }
    out << oc.summary << '\n';
    if (opts.check_thresholds && !oc.within_threshold) {
      fmt::print(err, "threshold violated: {}\n", oc.summary);
      return kThresholdViolation;
    }
    return kOk;
  } catch (const std::invalid_argument& e) {
    fmt::print(err, "configuration error: {}\n", e.what());
    return kConfigError;
  } catch (const SolverError& e) {
    fmt::print(err, "solver failure: {} (residual {:.3e} after {} iterations)\n", e.what(), e.residual(),
               e.iterations());
    return kSolverFailure;
  } catch (const std::exception& e) {
    fmt::print(err, "solver failure: {}\n", e.what());
    return kSolverFailure;
  }
}

}  // namespace degdiff
