#pragma once

// Implicit-Euler time integration of the viscous Cahn-Hilliard relaxation in
// mixed (u, mu) form and of the degenerate diffusion limit problems with Robin
// or Neumann boundary conditions.
//
// Discrete relaxed system per step (A = K + kappa B, M_L lumped mass):
//   M_L (u+ - u) / tau + A mu+ = 0
//   M_L mu+ = lambda M_L (u+ - u) / tau + eps A u+ + M_L [beta_lambda(u+) + pi_eps(u+) - f+]
// Discrete limit problem per step:
//   M_L (u+ - u) / tau + A xi+ = M g+ + h+,   xi+ = beta_lambda_ref(u+) nodewise
// with A = K (no boundary term) for the Neumann scheme.

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "degdiff/fem.hpp"
#include "degdiff/graphs.hpp"

namespace degdiff::solver {

struct ChParams {
  double eps = 0.1;
  double lambda = 0.1;
  double kappa = 1.0;
  double tau = 1e-2;
  double T = 0.1;
  graphs::GraphSpec graph = graphs::GraphSpec::identity();
  graphs::PiSpec pi{};
  double newton_tol = 1e-10;
  int newton_max = 50;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct ChState {
  fem::PrimalField u;
  fem::PrimalField mu;
  double t = 0.0;
  int step = 0;
  int newton_iterations = 0;
  double residual = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> mu;
  std::vector<std::vector<double>> xi;
  /// (u^n - u^{n-1}) / tau_n for n = 1..N; one entry fewer than the snapshots.
  std::vector<std::vector<double>> du;
  int max_newton_iterations = 0;
  int step_retries = 0;

  std::size_t num_snapshots() const { return times.size(); }
  std::size_t num_steps() const { return du.size(); }
  double step_size(std::size_t n) const { return times[n] - times[n - 1]; }
  /// Throws std::logic_error if the invariants (increasing times, matching counts) fail.
  void validate() const;
};

/// Source f(t) of the relaxed system, already lifted through build_f.
using Forcing = std::function<fem::PrimalField(double t)>;
/// Nodal bulk data g(t).
using BulkData = std::function<fem::PrimalField(double t)>;
/// Boundary data h(t) at the left and right endpoints.
using BoundaryData = std::function<std::array<double, 2>(double t)>;

/// f(t) = build_f(g(t), h(t)).
Forcing make_forcing(const fem::FemOperators& ops, BulkData g, BoundaryData h);
Forcing zero_forcing(const fem::FemOperators& ops);

/// Elliptic mollification: (M + eps^{1/2} (K + kappa B)) u0e = M u0.
fem::PrimalField initial_smoothing(const fem::FemOperators& ops, const fem::PrimalField& u0,
                                   double eps);

/// One implicit-Euler step of the relaxed system. Throws SolverError on
/// Newton failure.
ChState ch_step(const fem::FemOperators& ops, const ChParams& params, const ChState& state,
                const fem::PrimalField& f_next);

/// Marches from u0e to T. A failed step is retried once as two half steps.
Trajectory march_ch(const fem::FemOperators& ops, const ChParams& params,
                    const fem::PrimalField& u0e, const Forcing& f);

enum class BoundaryScheme { robin, neumann };

struct LimitParams {
  BoundaryScheme scheme = BoundaryScheme::robin;
  graphs::GraphSpec graph = graphs::GraphSpec::identity();
  double lambda_ref = 1e-8;
  double tau = 1e-2;
  double T = 0.1;
  double newton_tol = 1e-10;
  int newton_max = 50;

  void validate() const;
};

/// Implicit Euler for the limit problem; the trajectory's mu equals xi.
/// Robin requires ops.kappa() > 0; Neumann ignores kappa.
Trajectory limit_march(const fem::FemOperators& ops, const LimitParams& params,
                       const BulkData& g, const BoundaryData& h, const fem::PrimalField& u0);

/// step,t,node_index,x,u,mu,xi
void write_trajectory_csv(std::ostream& out, const fem::Mesh1D& mesh, const Trajectory& traj);

/// Number of steps for (T, tau); throws ConfigError if T is not a multiple of tau.
int step_count(double T, double tau);

}  // namespace degdiff::solver
