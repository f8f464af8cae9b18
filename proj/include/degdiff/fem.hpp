#pragma once

// P1 finite elements on a uniform mesh of an interval: mass, lumped mass,
// stiffness and boundary matrices, the kappa-weighted V norm, the duality map
// F = K + kappa B and its inverse, the V* norm, and the Robin Laplacian.

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "degdiff/linalg.hpp"

namespace degdiff::fem {

class Mesh1D {
 public:
  /// Throws ConfigError unless a < b and n_cells >= 2.
  Mesh1D(double a, double b, int n_cells);

  double a() const { return a_; }
  double b() const { return b_; }
  int n_cells() const { return n_cells_; }
  std::size_t num_nodes() const { return static_cast<std::size_t>(n_cells_) + 1; }
  double h() const { return (b_ - a_) / n_cells_; }
  double x(std::size_t i) const;
  std::vector<double> nodes() const;

 private:
  double a_;
  double b_;
  int n_cells_;
};

enum class FieldRole { h_function, v_function };

/// Nodal values of a discrete function.
struct PrimalField {
  std::vector<double> values;
  FieldRole role = FieldRole::h_function;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

/// Functional coordinates L_i = l(phi_i) against the nodal basis.
struct DualField {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

class FemOperators {
 public:
  FemOperators(const Mesh1D& mesh, double kappa);

  const Mesh1D& mesh() const { return mesh_; }
  double kappa() const { return kappa_; }
  std::size_t size() const { return mesh_.num_nodes(); }

  const linalg::Tridiag& mass() const { return mass_; }
  const std::vector<double>& lumped_mass() const { return lumped_; }
  const linalg::Tridiag& stiffness() const { return stiffness_; }
  /// Diagonal of B: 1 at the two boundary nodes, 0 elsewhere.
  const std::vector<double>& boundary() const { return boundary_; }
  /// K + kappa B.
  const linalg::Tridiag& robin() const { return robin_; }

  const linalg::TridiagFactor& mass_factor() const { return *mass_factor_; }
  /// Throws SingularOperatorError when kappa <= 0.
  const linalg::TridiagFactor& robin_factor() const;

 private:
  Mesh1D mesh_;
  double kappa_;
  linalg::Tridiag mass_;
  std::vector<double> lumped_;
  linalg::Tridiag stiffness_;
  std::vector<double> boundary_;
  linalg::Tridiag robin_;
  std::optional<linalg::TridiagFactor> mass_factor_;
  std::optional<linalg::TridiagFactor> robin_factor_;
};

/// Assembles the P1 operators. kappa = 0 is accepted for the Neumann path,
/// where F is never inverted. Throws ConfigError for kappa < 0.
FemOperators assemble(const Mesh1D& mesh, double kappa);

double v_norm(const FemOperators& ops, const PrimalField& z);
DualField duality_map(const FemOperators& ops, const PrimalField& z);
PrimalField duality_solve(const FemOperators& ops, const DualField& load);
double vstar_norm(const FemOperators& ops, const DualField& load);

/// M u
DualField mass_apply(const FemOperators& ops, const PrimalField& u);
/// M_L u
DualField lumped_apply(const FemOperators& ops, const PrimalField& u);

/// Point loads at the two boundary nodes.
DualField boundary_load(const FemOperators& ops, std::array<double, 2> h_values);

/// Solves (K + kappa B) f = M g + boundary_load(h).
PrimalField build_f(const FemOperators& ops, const PrimalField& g, std::array<double, 2> h_values);

/// M^{-1} (K + kappa B) u.
PrimalField robin_laplacian_apply(const FemOperators& ops, const PrimalField& u);

/// Discrete H inner product of nodal fields, weighted by the lumped mass.
double h_inner(const FemOperators& ops, std::span<const double> u, std::span<const double> v);
double h_norm_sq(const FemOperators& ops, std::span<const double> u);

/// Extreme generalized eigenvalues of (K + kappa B) v = lambda (K + M) v:
/// discrete analogues of the norm-equivalence constants between |.|_V and the
/// standard H^1 norm.
struct NormConstants {
  double c_p;
  double c_p_prime;
};
NormConstants norm_equivalence(const FemOperators& ops);

/// Smallest C with |M u|_{V*} <= C (u^T M u)^{1/2} for all u.
double riesz_bound(const FemOperators& ops);

PrimalField interpolate(const Mesh1D& mesh, const std::function<double(double)>& fn,
                        FieldRole role = FieldRole::h_function);

/// (row, col, value) for every stored entry.
void write_matrix_csv(std::ostream& out, const linalg::Tridiag& m);

}  // namespace degdiff::fem
