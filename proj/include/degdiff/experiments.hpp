#pragma once

// Scenario registry and the parameter sweeps: lambda -> 0 at fixed eps,
// eps -> 0 against the limit problem, kappa -> 0 (Robin -> Neumann), the
// uniform-bound audit over an (eps, lambda) grid, and the uniqueness probe.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "degdiff/analysis.hpp"
#include "degdiff/fem.hpp"
#include "degdiff/graphs.hpp"
#include "degdiff/solver.hpp"

namespace degdiff::experiments {

/// Data route: general bulk and boundary data with the growth condition on
/// beta (a4), or homogeneous boundary data without it (a6).
enum class Route { a4, a6 };

std::string_view route_name(Route route);

struct Scenario {
  std::string id;
  std::string title;
  graphs::GraphSpec graph;
  graphs::PiSpec pi;
  Route route = Route::a4;
  double kappa = 1.0;
  double a = 0.0;
  double b = 1.0;
  std::function<double(double x, double t)> g;
  std::function<std::array<double, 2>(double t)> h;
  std::function<double(double x)> u0;
  /// Closed-form solution of the limit problem, when manufactured.
  std::function<double(double x, double t)> exact;

  /// Throws ConfigError when the route's requirements fail: a6 needs h == 0,
  /// a4 needs the growth condition on beta.
  void validate() const;

  solver::BulkData bulk(const fem::Mesh1D& mesh) const;
  solver::BoundaryData boundary() const;
  fem::PrimalField initial(const fem::Mesh1D& mesh) const;
};

const std::vector<std::string>& scenario_ids();

/// Builds a catalog scenario ("S1".."S5") with its nominal kappa unless one is
/// given. Throws ConfigError listing the available ids for anything else.
Scenario make_scenario(std::string_view id, std::optional<double> kappa = std::nullopt);

/// |u_t - (beta(u))_xx - g| at (x, t) for a manufactured scenario, evaluated
/// by central differences of the closed form.
double manufactured_residual(const Scenario& scn, double x, double t);

struct Discretization {
  int n_cells = 64;
  double tau = 1e-3;
  double T = 0.1;
  double lambda_ref = 1e-8;
  double newton_tol = 1e-10;
  int newton_max = 50;
  int jobs = 1;
};

analysis::ConvergenceRecord sweep_lambda(const Scenario& scn, const Discretization& disc,
                                         double eps, std::span<const double> lambdas);

analysis::ConvergenceRecord sweep_eps(const Scenario& scn, const Discretization& disc,
                                      std::span<const double> eps_list);

analysis::ConvergenceRecord sweep_kappa(const Scenario& scn, const Discretization& disc,
                                        std::span<const double> kappas);

struct AuditCell {
  double eps = 0.0;
  double lambda = 0.0;
  std::optional<analysis::EnergyReport> report;
  /// max_t |u|_H^2 + lambda |u|_V^2
  double m4 = 0.0;
  std::string error;
};

struct AuditReport {
  std::string scenario;
  Route route = Route::a4;
  std::vector<AuditCell> cells;
  /// max / median per EnergyReport field over successful cells.
  std::array<double, 8> ratios{};
  double m4_ratio = 0.0;
  double max_ratio = 0.0;
  int max_newton_iterations = 0;

  bool passes(double threshold = 10.0) const;
};

AuditReport uniform_bound_audit(const Scenario& scn, const Discretization& disc,
                                std::span<const double> eps_grid,
                                std::span<const double> lambda_grid);

struct UniquenessResult {
  double deviation = 0.0;
  double cauchy_gap = 0.0;
  bool within_bound = false;
};

UniquenessResult uniqueness_probe(const Scenario& scn, const Discretization& disc, double eps,
                                  std::span<const double> path_a, std::span<const double> path_b);

/// max / median; 1 when both vanish, +inf when only the median does.
double max_median_ratio(std::vector<double> values);

}  // namespace degdiff::experiments
