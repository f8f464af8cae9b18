#include "degdiff/fem.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "degdiff/errors.hpp"
#include "degdiff/simd/kernels.hpp"

namespace degdiff::fem {

Mesh1D::Mesh1D(double a, double b, int n_cells) : a_(a), b_(b), n_cells_(n_cells) {
  if (!(a < b)) throw ConfigError(fmt::format("mesh: need a < b, got ({}, {})", a, b));
  if (n_cells < 2) throw ConfigError(fmt::format("mesh: n_cells must be >= 2, got {}", n_cells));
}

double Mesh1D::x(std::size_t i) const {
  if (i == num_nodes() - 1) return b_;
  return a_ + static_cast<double>(i) * h();
}

std::vector<double> Mesh1D::nodes() const {
  std::vector<double> xs(num_nodes());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = x(i);
  return xs;
}

FemOperators::FemOperators(const Mesh1D& mesh, double kappa) : mesh_(mesh), kappa_(kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw ConfigError(fmt::format("kappa must be finite and nonnegative, got {}", kappa));
  }
  const std::size_t n = mesh.num_nodes();
  const double h = mesh.h();

  mass_ = linalg::Tridiag::zeros(n);
  stiffness_ = linalg::Tridiag::zeros(n);
  // Element-by-element: local mass h/6 [[2,1],[1,2]], local stiffness 1/h [[1,-1],[-1,1]].
  for (std::size_t e = 0; e + 1 < n; ++e) {
    mass_.diag[e] += h / 3.0;
    mass_.diag[e + 1] += h / 3.0;
    mass_.lower[e] += h / 6.0;
    mass_.upper[e] += h / 6.0;
    stiffness_.diag[e] += 1.0 / h;
    stiffness_.diag[e + 1] += 1.0 / h;
    stiffness_.lower[e] -= 1.0 / h;
    stiffness_.upper[e] -= 1.0 / h;
  }

  lumped_.assign(n, h);
  lumped_.front() = 0.5 * h;
  lumped_.back() = 0.5 * h;

  boundary_.assign(n, 0.0);
  boundary_.front() = 1.0;
  boundary_.back() = 1.0;

  robin_ = stiffness_;
  robin_.diag.front() += kappa;
  robin_.diag.back() += kappa;

  mass_factor_.emplace(mass_);
  if (kappa > 0.0) robin_factor_.emplace(robin_);
}

const linalg::TridiagFactor& FemOperators::robin_factor() const {
  if (!robin_factor_) {
    throw SingularOperatorError(
        fmt::format("K + kappa B is singular for kappa = {} (constants lie in its kernel)", kappa_));
  }
  return *robin_factor_;
}

FemOperators assemble(const Mesh1D& mesh, double kappa) { return FemOperators(mesh, kappa); }

double v_norm(const FemOperators& ops, const PrimalField& z) {
  const auto fz = ops.robin().apply(z.values);
  return std::sqrt(std::max(0.0, simd::dot(fz, z.values)));
}

DualField duality_map(const FemOperators& ops, const PrimalField& z) {
  return DualField{ops.robin().apply(z.values)};
}

PrimalField duality_solve(const FemOperators& ops, const DualField& load) {
  return PrimalField{ops.robin_factor().solve(load.values), FieldRole::v_function};
}

double vstar_norm(const FemOperators& ops, const DualField& load) {
  const auto z = ops.robin_factor().solve(load.values);
  return std::sqrt(std::max(0.0, simd::dot(load.values, z)));
}

DualField mass_apply(const FemOperators& ops, const PrimalField& u) {
  return DualField{ops.mass().apply(u.values)};
}

DualField lumped_apply(const FemOperators& ops, const PrimalField& u) {
  DualField out{u.values};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= ops.lumped_mass()[i];
  return out;
}

DualField boundary_load(const FemOperators& ops, std::array<double, 2> h_values) {
  DualField out{std::vector<double>(ops.size(), 0.0)};
  out.values.front() = h_values[0];
  out.values.back() = h_values[1];
  return out;
}

PrimalField build_f(const FemOperators& ops, const PrimalField& g, std::array<double, 2> h_values) {
  auto rhs = ops.mass().apply(g.values);
  rhs.front() += h_values[0];
  rhs.back() += h_values[1];
  ops.robin_factor().solve_in_place(rhs);
  return PrimalField{std::move(rhs), FieldRole::v_function};
}

PrimalField robin_laplacian_apply(const FemOperators& ops, const PrimalField& u) {
  auto w = ops.robin().apply(u.values);
  ops.mass_factor().solve_in_place(w);
  return PrimalField{std::move(w), FieldRole::h_function};
}

double h_inner(const FemOperators& ops, std::span<const double> u, std::span<const double> v) {
  return simd::weighted_dot(ops.lumped_mass(), u, v);
}

double h_norm_sq(const FemOperators& ops, std::span<const double> u) { return h_inner(ops, u, u); }

namespace {

Eigen::MatrixXd dense(const linalg::Tridiag& t) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = t.diag[static_cast<std::size_t>(i)];
    if (i + 1 < n) {
      m(i, i + 1) = t.upper[static_cast<std::size_t>(i)];
      m(i + 1, i) = t.lower[static_cast<std::size_t>(i)];
    }
  }
  return m;
}

}  // namespace

NormConstants norm_equivalence(const FemOperators& ops) {
  const Eigen::MatrixXd f = dense(ops.robin());
  const Eigen::MatrixXd h1 = dense(ops.stiffness()) + dense(ops.mass());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(f, h1, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw SingularOperatorError("norm_equivalence: eigensolver failed");
  const auto& ev = solver.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

double riesz_bound(const FemOperators& ops) {
  const Eigen::MatrixXd f = dense(ops.robin());
  const Eigen::MatrixXd m = dense(ops.mass());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(f, m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw SingularOperatorError("riesz_bound: eigensolver failed");
  const double lmin = solver.eigenvalues().minCoeff();
  if (!(lmin > 0.0)) throw SingularOperatorError("riesz_bound: F is not positive definite");
  return 1.0 / std::sqrt(lmin);
}

PrimalField interpolate(const Mesh1D& mesh, const std::function<double(double)>& fn,
                        FieldRole role) {
  PrimalField out{std::vector<double>(mesh.num_nodes()), role};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(mesh.x(i));
  return out;
}

void write_matrix_csv(std::ostream& out, const linalg::Tridiag& m) {
  out << "row,col,value\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i > 0) fmt::print(out, "{},{},{}\n", i, i - 1, m.lower[i - 1]);
    fmt::print(out, "{},{},{}\n", i, i, m.diag[i]);
    if (i + 1 < m.size()) fmt::print(out, "{},{},{}\n", i, i + 1, m.upper[i]);
  }
}

}  // namespace degdiff::fem
