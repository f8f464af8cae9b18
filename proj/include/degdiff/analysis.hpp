#pragma once

// Energy monitors, error functionals between trajectories, and log-log rate
// fitting.
//
// Time integrals are sums over implicit-Euler steps n = 1..N weighted by the
// step size; sup-in-time quantities include the initial snapshot. H inner
// products of nodal fields use the lumped mass.

#include <array>
#include <limits>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "degdiff/fem.hpp"
#include "degdiff/solver.hpp"

namespace degdiff::analysis {

class GridMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EnergyReport {
  double int_du_vstar_sq = 0.0;  // int |u'|_{V*}^2
  double int_du_h_sq_lam = 0.0;  // lambda int |u'|_H^2
  double max_eps_u_v_sq = 0.0;   // max_t eps |u|_V^2
  double max_hat_beta_l1 = 0.0;  // max_t int |hat_beta_lambda(u)|
  double max_u_h_sq = 0.0;       // max_t |u|_H^2
  double int_mu_v_sq = 0.0;      // int |mu|_V^2
  double int_beta_h_sq = 0.0;    // int |beta_lambda(u)|_H^2
  double int_eps_lap_sq = 0.0;   // int |eps A_h u|_H^2

  static constexpr std::array<std::string_view, 8> kFieldNames{
      "int_du_vstar_sq", "int_du_h_sq_lam", "max_eps_u_v_sq", "max_hat_beta_l1",
      "max_u_h_sq",      "int_mu_v_sq",     "int_beta_h_sq",  "int_eps_lap_sq"};

  std::array<double, 8> values() const;
};

EnergyReport energy_report(const fem::FemOperators& ops, const solver::Trajectory& traj,
                           const solver::ChParams& params);

/// (eps/2)|u|_V^2 + sum_i m_i [hat_beta_lambda(u_i) + hat_pi_eps(u_i)]
double discrete_energy(const fem::FemOperators& ops, const solver::ChParams& params,
                       std::span<const double> u);

struct LyapunovResult {
  bool ok = true;
  double worst_violation = 0.0;  // max_n (E^n - E^{n-1}), <= 0 when monotone
  std::size_t worst_step = 0;
  std::vector<double> energy;
};

/// Checks E^n <= E^{n-1} + slack for a run with zero forcing.
LyapunovResult lyapunov_check(const fem::FemOperators& ops, const solver::Trajectory& traj,
                              const solver::ChParams& params, double slack = 1e-12);

/// max_n |M_L (u_A - u_B)|_{V*}
double cvstar_error(const fem::FemOperators& ops, const solver::Trajectory& a,
                    const solver::Trajectory& b);

/// max_n |u_A - u_B|_H
double ch_error(const fem::FemOperators& ops, const solver::Trajectory& a,
                const solver::Trajectory& b);

/// sum_n tau_n (xi_A - xi_B, u_A - u_B)_H
double duality_gap(const fem::FemOperators& ops, const solver::Trajectory& a,
                   const solver::Trajectory& b);

enum class Field { u, xi };

/// sum_n tau_n |field_A - field_B|_H^2
double l2h_error(const fem::FemOperators& ops, const solver::Trajectory& a,
                 const solver::Trajectory& b, Field field);

/// Largest |1^T M_L (u^n - u^{n-1})/tau + kappa (mu^n_0 + mu^n_N)| over steps,
/// relative to max(1, size of the two terms): the z = 1 test of the relaxed
/// system.
double ch_flux_balance(const fem::FemOperators& ops, const solver::Trajectory& traj);

/// Same for the limit march: 1^T M_L du + kappa sum_boundary xi - 1^T M g - sum h.
double limit_flux_balance(const fem::FemOperators& ops, const solver::Trajectory& traj,
                          solver::BoundaryScheme scheme, const solver::BulkData& g,
                          const solver::BoundaryData& h);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares on (log param, log error). Throws std::invalid_argument for
/// fewer than three points or nonpositive values.
RateFit fit_rate(std::span<const std::pair<double, double>> points);

struct ConvergenceRecord {
  std::string sweep_id;
  std::string scenario;
  std::string param_name;
  std::vector<double> params;
  std::vector<double> cvstar_sq;
  std::vector<double> duality_gap;
  std::vector<double> l2h_xi_sq;
  /// Error functional the slope is fitted to.
  std::vector<double> error;
  RateFit fit{};
  bool fitted = false;
  /// Strictly decreasing error sequence (zero sequences count as decreasing).
  bool monotone = true;
  double expected_slope = 0.0;
  /// Slope of the l2h_xi_sq column when it is fitted separately.
  RateFit xi_fit{};
  bool xi_fitted = false;
  int max_newton_iterations = 0;
};

/// Every entry after the first strictly below its predecessor, or both zero.
bool strictly_decreasing(std::span<const double> values);

/// sweep_id,scenario,param_name,param_value,cvstar_sq,duality_gap,l2h_xi_sq,slope,r2,error
void write_convergence_csv(std::ostream& out, const ConvergenceRecord& rec, bool header = true);

/// scenario,eps,lambda,<eight EnergyReport fields>
void write_energy_header(std::ostream& out);
void write_energy_row(std::ostream& out, std::string_view scenario, double eps, double lambda,
                      const EnergyReport& report);

}  // namespace degdiff::analysis
