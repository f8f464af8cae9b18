#include "degdiff/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "degdiff/errors.hpp"

namespace degdiff::experiments {
namespace {

using Vec = std::vector<double>;
using analysis::ConvergenceRecord;

// Runs fn(i) for i in [0, count) on up to `jobs` threads; results land in index
// order, so the output does not depend on scheduling. The first exception (by
// index) is rethrown.
template <class Fn>
auto parallel_map(int jobs, std::size_t count, Fn&& fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<std::optional<Result>> results(count);
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](std::size_t i) {
    try {
      results[i].emplace(fn(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
  } else {
    std::mutex mtx;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mtx);
            if (next >= count) return;
            i = next++;
          }
          work(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Result> out;
  out.reserve(count);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

void require_decreasing(std::span<const double> values, std::string_view name, std::size_t min_len) {
  if (values.size() < min_len) {
    throw ConfigError(fmt::format("{} needs at least {} values, got {}", name, min_len, values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw ConfigError(fmt::format("{}: entries must be positive, got {}", name, values[i]));
    }
    if (i > 0 && !(values[i] < values[i - 1])) {
      throw ConfigError(fmt::format("{} must be strictly decreasing ({} follows {})", name,
                                    values[i], values[i - 1]));
    }
  }
}

solver::ChParams ch_params(const Scenario& scn, const Discretization& disc, double eps,
                           double lambda) {
  solver::ChParams p;
  p.eps = eps;
  p.lambda = lambda;
  p.kappa = scn.kappa;
  p.tau = disc.tau;
  p.T = disc.T;
  p.graph = scn.graph;
  p.pi = scn.pi;
  p.newton_tol = disc.newton_tol;
  p.newton_max = disc.newton_max;
  return p;
}

solver::LimitParams limit_params(const Scenario& scn, const Discretization& disc,
                                 solver::BoundaryScheme scheme) {
  solver::LimitParams p;
  p.scheme = scheme;
  p.graph = scn.graph;
  p.lambda_ref = disc.lambda_ref;
  p.tau = disc.tau;
  p.T = disc.T;
  p.newton_tol = disc.newton_tol;
  p.newton_max = disc.newton_max;
  return p;
}

solver::Trajectory run_ch(const Scenario& scn, const Discretization& disc,
                          const fem::FemOperators& ops, double eps, double lambda) {
  const auto params = ch_params(scn, disc, eps, lambda);
  const auto u0e = solver::initial_smoothing(ops, scn.initial(ops.mesh()), eps);
  const auto forcing = solver::make_forcing(ops, scn.bulk(ops.mesh()), scn.boundary());
  try {
    return solver::march_ch(ops, params, u0e, forcing);
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("{} (scenario {}, eps={}, lambda={})", e.what(), scn.id, eps, lambda),
                      e.residual(), e.iterations());
  }
}

void fit_if_possible(ConvergenceRecord& rec) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < rec.params.size() && i < rec.error.size(); ++i) {
    pts.emplace_back(rec.params[i], rec.error[i]);
  }
  const bool positive = std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.second > 0.0; });
  if (pts.size() >= 3 && positive) {
    rec.fit = analysis::fit_rate(pts);
    rec.fitted = true;
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace

std::string_view route_name(Route route) { return route == Route::a4 ? "A4" : "A6"; }

void Scenario::validate() const {
  if (!g || !h || !u0) throw ConfigError(fmt::format("scenario {}: missing data generators", id));
  if (!(kappa > 0.0)) throw ConfigError(fmt::format("scenario {}: kappa must be positive", id));
  if (route == Route::a6) {
    for (double t : {0.0, 0.05, 0.1, 0.5, 1.0}) {
      const auto hv = h(t);
      if (hv[0] != 0.0 || hv[1] != 0.0) {
        throw ConfigError(fmt::format("scenario {}: route A6 requires h == 0, got h({})=({}, {})", id,
                                      t, hv[0], hv[1]));
      }
    }
  } else if (!graph.a2_holds) {
    throw ConfigError(fmt::format(
        "scenario {}: graph {} violates the growth condition, so route A4 is not admissible "
        "(use route A6 with h == 0)",
        id, graph.id()));
  }
}

solver::BulkData Scenario::bulk(const fem::Mesh1D& mesh) const {
  return [mesh, g = g](double t) {
    return fem::interpolate(mesh, [&](double x) { return g(x, t); });
  };
}

solver::BoundaryData Scenario::boundary() const { return h; }

fem::PrimalField Scenario::initial(const fem::Mesh1D& mesh) const {
  return fem::interpolate(mesh, u0);
}

const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids{"S1", "S2", "S3", "S4", "S5"};
  return ids;
}

Scenario make_scenario(std::string_view id, std::optional<double> kappa) {
  using std::numbers::pi;
  Scenario s;
  s.id = std::string(id);
  s.pi = graphs::PiSpec{graphs::SigmaKind::sqrt, 1.0};
  s.kappa = kappa.value_or(1.0);
  if (!(s.kappa > 0.0)) throw ConfigError(fmt::format("scenario {}: kappa must be positive", id));
  const double k = s.kappa;
  auto zero_h = [](double) { return std::array<double, 2>{0.0, 0.0}; };

  if (id == "S1") {
    s.title = "linear-robin";
    s.graph = graphs::GraphSpec::identity();
    s.route = Route::a4;
    s.g = [](double, double) { return 0.0; };
    s.h = [k](double t) {
      const double e = std::exp(-t);
      return std::array<double, 2>{k * e, e * (-std::sin(1.0) + k * std::cos(1.0))};
    };
    s.u0 = [](double x) { return std::cos(x); };
    s.exact = [](double x, double t) { return std::exp(-t) * std::cos(x); };
  } else if (id == "S2") {
    s.title = "porous";
    s.graph = graphs::GraphSpec::porous(2.0);
    s.route = Route::a6;
    s.g = [](double x, double) { return 0.5 * std::exp(-(x - 0.5) * (x - 0.5) / 0.02); };
    s.h = zero_h;
    s.u0 = [](double x) { return std::max(0.0, 1.0 - 4.0 * (x - 0.5) * (x - 0.5)); };
  } else if (id == "S3") {
    s.title = "stefan";
    s.graph = graphs::GraphSpec::stefan(1.0, 1.0, 1.0);
    s.route = Route::a4;
    s.g = [](double x, double) { return x < 0.5 ? 1.0 : 0.0; };
    s.h = [](double) { return std::array<double, 2>{0.5, 0.0}; };
    s.u0 = [](double x) { return 2.5 - 4.0 * x; };
  } else if (id == "S4") {
    s.title = "fast-diffusion";
    s.graph = graphs::GraphSpec::fast(0.5);
    s.route = Route::a6;
    s.g = [](double x, double) { return 0.5 * std::sin(pi * x); };
    s.h = zero_h;
    s.u0 = [](double x) { return 1.0 + 0.5 * std::cos(pi * x); };
  } else if (id == "S5") {
    s.title = "obstacle";
    s.graph = graphs::GraphSpec::double_obstacle(0.0, 1.0);
    s.route = Route::a6;
    s.g = [](double x, double) { return x < 0.3 ? 2.0 : (x > 0.7 ? -2.0 : 0.0); };
    s.h = zero_h;
    s.u0 = [](double x) { return 0.5 + 0.3 * std::cos(pi * x); };
  } else {
    std::string list;
    for (const auto& sid : scenario_ids()) list += (list.empty() ? "" : ", ") + sid;
    throw ConfigError(fmt::format("unknown scenario '{}' (available: {})", id, list));
  }
  s.validate();
  return s;
}

double manufactured_residual(const Scenario& scn, double x, double t) {
  if (!scn.exact) throw ConfigError(fmt::format("scenario {} has no closed-form solution", scn.id));
  auto beta_of = [&](double xx) {
    const auto sel = graphs::beta_set(scn.graph, scn.exact(xx, t));
    if (!sel || sel->lo != sel->hi) throw ConfigError("manufactured solution leaves the single-valued range");
    return sel->lo;
  };
  const double dt = 1e-5;
  const double dx = 1e-3;
  const double ut = (scn.exact(x, t + dt) - scn.exact(x, t - dt)) / (2.0 * dt);
  const double lap = (beta_of(x + dx) - 2.0 * beta_of(x) + beta_of(x - dx)) / (dx * dx);
  return std::abs(ut - lap - scn.g(x, t));
}

analysis::ConvergenceRecord sweep_lambda(const Scenario& scn, const Discretization& disc,
                                         double eps, std::span<const double> lambdas) {
  scn.validate();
  require_decreasing(lambdas, "lambda_list", 3);
  const fem::FemOperators ops(fem::Mesh1D(scn.a, scn.b, disc.n_cells), scn.kappa);
  const auto trajs = parallel_map(disc.jobs, lambdas.size(),
                                  [&](std::size_t i) { return run_ch(scn, disc, ops, eps, lambdas[i]); });

  ConvergenceRecord rec;
  rec.sweep_id = "sweep-lambda";
  rec.scenario = scn.id;
  rec.param_name = "lambda";
  for (const auto& t : trajs) rec.max_newton_iterations = std::max(rec.max_newton_iterations, t.max_newton_iterations);
  for (std::size_t i = 1; i < trajs.size(); ++i) {
    rec.params.push_back(lambdas[i]);
    const double cv = analysis::cvstar_error(ops, trajs[i - 1], trajs[i]);
    rec.cvstar_sq.push_back(cv * cv);
    rec.duality_gap.push_back(analysis::duality_gap(ops, trajs[i - 1], trajs[i]));
    rec.l2h_xi_sq.push_back(analysis::l2h_error(ops, trajs[i - 1], trajs[i], analysis::Field::xi));
    rec.error.push_back(analysis::ch_error(ops, trajs[i - 1], trajs[i]));
  }
  rec.monotone = analysis::strictly_decreasing(rec.error);
  rec.expected_slope = 0.0;
  fit_if_possible(rec);
  return rec;
}

analysis::ConvergenceRecord sweep_eps(const Scenario& scn, const Discretization& disc,
                                      std::span<const double> eps_list) {
  scn.validate();
  require_decreasing(eps_list, "eps_list", 2);
  if (eps_list.front() > 1.0) throw ConfigError("eps_list: entries must lie in (0,1]");
  if (scn.pi.sigma != graphs::SigmaKind::sqrt) {
    throw ConfigError(fmt::format("sweep_eps needs sigma(eps) = eps^(1/2); scenario {} uses {}", scn.id,
                                  graphs::pi_id(scn.pi)));
  }
  const fem::FemOperators ops(fem::Mesh1D(scn.a, scn.b, disc.n_cells), scn.kappa);
  const double lbar = graphs::lambda_bar(scn.graph);

  // index 0 is the limit reference; 1.. are the relaxed runs
  const auto trajs = parallel_map(disc.jobs, eps_list.size() + 1, [&](std::size_t i) {
    if (i == 0) {
      return solver::limit_march(ops, limit_params(scn, disc, solver::BoundaryScheme::robin),
                                 scn.bulk(ops.mesh()), scn.boundary(), scn.initial(ops.mesh()));
    }
    const double eps = eps_list[i - 1];
    return run_ch(scn, disc, ops, eps, std::min(lbar, eps * eps));
  });

  ConvergenceRecord rec;
  rec.sweep_id = "sweep-eps";
  rec.scenario = scn.id;
  rec.param_name = "eps";
  rec.expected_slope = scn.route == Route::a6 ? 0.5 : 1.0 / 3.0;
  const auto& ref = trajs[0];
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const auto& tr = trajs[i + 1];
    const double cv = analysis::cvstar_error(ops, tr, ref);
    const double gap = analysis::duality_gap(ops, tr, ref);
    rec.params.push_back(eps_list[i]);
    rec.cvstar_sq.push_back(cv * cv);
    rec.duality_gap.push_back(gap);
    rec.l2h_xi_sq.push_back(analysis::l2h_error(ops, tr, ref, analysis::Field::xi));
    rec.error.push_back(cv * cv + gap);
  }
  for (const auto& t : trajs) rec.max_newton_iterations = std::max(rec.max_newton_iterations, t.max_newton_iterations);
  rec.monotone = analysis::strictly_decreasing(rec.error);
  fit_if_possible(rec);
  return rec;
}

analysis::ConvergenceRecord sweep_kappa(const Scenario& scn, const Discretization& disc,
                                        std::span<const double> kappas) {
  scn.validate();
  require_decreasing(kappas, "kappa_list", 2);
  const fem::Mesh1D mesh(scn.a, scn.b, disc.n_cells);
  // Errors are measured in the fixed kappa = 1 metric.
  const fem::FemOperators metric(mesh, 1.0);
  const fem::FemOperators neumann_ops(mesh, 0.0);

  const auto trajs = parallel_map(disc.jobs, kappas.size() + 1, [&](std::size_t i) {
    if (i == 0) {
      return solver::limit_march(neumann_ops, limit_params(scn, disc, solver::BoundaryScheme::neumann),
                                 scn.bulk(mesh), scn.boundary(), scn.initial(mesh));
    }
    const fem::FemOperators ops(mesh, kappas[i - 1]);
    return solver::limit_march(ops, limit_params(scn, disc, solver::BoundaryScheme::robin),
                               scn.bulk(mesh), scn.boundary(), scn.initial(mesh));
  });

  ConvergenceRecord rec;
  rec.sweep_id = "sweep-kappa";
  rec.scenario = scn.id;
  rec.param_name = "kappa";
  rec.expected_slope = 2.0;
  const auto& ref = trajs[0];
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    const auto& tr = trajs[i + 1];
    const double cv = analysis::cvstar_error(metric, tr, ref);
    const double gap = analysis::duality_gap(metric, tr, ref);
    rec.params.push_back(kappas[i]);
    rec.cvstar_sq.push_back(cv * cv);
    rec.duality_gap.push_back(gap);
    rec.l2h_xi_sq.push_back(analysis::l2h_error(metric, tr, ref, analysis::Field::xi));
    rec.error.push_back(cv * cv + 2.0 * gap);
  }
  for (const auto& t : trajs) rec.max_newton_iterations = std::max(rec.max_newton_iterations, t.max_newton_iterations);
  rec.monotone = analysis::strictly_decreasing(rec.error);
  fit_if_possible(rec);
  if (rec.params.size() >= 3 &&
      std::all_of(rec.l2h_xi_sq.begin(), rec.l2h_xi_sq.end(), [](double v) { return v > 0.0; })) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < rec.params.size(); ++i) pts.emplace_back(rec.params[i], rec.l2h_xi_sq[i]);
    rec.xi_fit = analysis::fit_rate(pts);
    rec.xi_fitted = true;
  }
  return rec;
}

double max_median_ratio(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const double mx = *std::max_element(values.begin(), values.end());
  const double md = median(std::move(values));
  if (md == 0.0) return mx == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return mx / md;
}

bool AuditReport::passes(double threshold) const {
  const bool all_ran = std::all_of(cells.begin(), cells.end(), [](const AuditCell& c) { return c.report.has_value(); });
  return all_ran && max_ratio <= threshold;
}

AuditReport uniform_bound_audit(const Scenario& scn, const Discretization& disc,
                                std::span<const double> eps_grid,
                                std::span<const double> lambda_grid) {
  scn.validate();
  if (eps_grid.empty() || lambda_grid.empty()) throw ConfigError("audit: eps and lambda grids must be nonempty");
  const fem::FemOperators ops(fem::Mesh1D(scn.a, scn.b, disc.n_cells), scn.kappa);

  std::vector<std::pair<double, double>> grid;
  for (double e : eps_grid) {
    for (double l : lambda_grid) grid.emplace_back(e, l);
  }
  AuditReport rep;
  rep.scenario = scn.id;
  rep.route = scn.route;
  rep.cells = parallel_map(disc.jobs, grid.size(), [&](std::size_t i) {
    AuditCell cell;
    cell.eps = grid[i].first;
    cell.lambda = grid[i].second;
    try {
      const auto traj = run_ch(scn, disc, ops, cell.eps, cell.lambda);
      const auto params = ch_params(scn, disc, cell.eps, cell.lambda);
      cell.report = analysis::energy_report(ops, traj, params);
      for (const auto& u : traj.u) {
        const Vec fu = ops.robin().apply(u);
        double vsq = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) vsq += fu[k] * u[k];
        cell.m4 = std::max(cell.m4, fem::h_norm_sq(ops, u) + cell.lambda * vsq);
      }
      cell.error = fmt::format("newton_max={}", traj.max_newton_iterations);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    return cell;
  });

  for (std::size_t f = 0; f < rep.ratios.size(); ++f) {
    std::vector<double> col;
    for (const auto& c : rep.cells) {
      if (c.report) col.push_back(c.report->values()[f]);
    }
    rep.ratios[f] = max_median_ratio(std::move(col));
    rep.max_ratio = std::max(rep.max_ratio, rep.ratios[f]);
  }
  if (scn.route == Route::a6) {
    std::vector<double> col;
    for (const auto& c : rep.cells) {
      if (c.report) col.push_back(c.m4);
    }
    rep.m4_ratio = max_median_ratio(std::move(col));
    rep.max_ratio = std::max(rep.max_ratio, rep.m4_ratio);
  }
  for (const auto& c : rep.cells) {
    if (c.report && c.error.rfind("newton_max=", 0) == 0) {
      rep.max_newton_iterations = std::max(rep.max_newton_iterations, std::stoi(c.error.substr(11)));
    }
  }
  return rep;
}

UniquenessResult uniqueness_probe(const Scenario& scn, const Discretization& disc, double eps,
                                  std::span<const double> path_a, std::span<const double> path_b) {
  scn.validate();
  require_decreasing(path_a, "lambda path A", 2);
  require_decreasing(path_b, "lambda path B", 2);
  const fem::FemOperators ops(fem::Mesh1D(scn.a, scn.b, disc.n_cells), scn.kappa);

  std::vector<double> distinct(path_a.begin(), path_a.end());
  distinct.insert(distinct.end(), path_b.begin(), path_b.end());
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const auto runs = parallel_map(disc.jobs, distinct.size(),
                                 [&](std::size_t i) { return run_ch(scn, disc, ops, eps, distinct[i]); });
  auto traj_for = [&](double lambda) -> const solver::Trajectory& {
    const auto it = std::find(distinct.begin(), distinct.end(), lambda);
    return runs[static_cast<std::size_t>(it - distinct.begin())];
  };

  UniquenessResult res;
  res.deviation = analysis::cvstar_error(ops, traj_for(path_a.back()), traj_for(path_b.back()));
  const auto finer = path_b.back() < path_a.back() ? path_b : path_a;
  res.cauchy_gap = analysis::cvstar_error(ops, traj_for(finer[finer.size() - 2]), traj_for(finer.back()));
  res.within_bound = res.deviation <= 10.0 * res.cauchy_gap;
  return res;
}

}  // namespace degdiff::experiments
