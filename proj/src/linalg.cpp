#include "degdiff/linalg.hpp"

#include <fmt/format.h>
#include <lapacke.h>

#include <cassert>
#include <cmath>

#include "degdiff/simd/kernels.hpp"

namespace degdiff::linalg {

Tridiag Tridiag::zeros(std::size_t n) {
  Tridiag t;
  t.diag.assign(n, 0.0);
  t.lower.assign(n > 0 ? n - 1 : 0, 0.0);
  t.upper.assign(n > 0 ? n - 1 : 0, 0.0);
  return t;
}

void Tridiag::apply(std::span<const double> x, std::span<double> y) const {
  assert(x.size() == size() && y.size() == size());
  simd::active().tridiag_apply(lower.data(), diag.data(), upper.data(), x.data(), y.data(),
                               size());
}

std::vector<double> Tridiag::apply(std::span<const double> x) const {
  std::vector<double> y(size());
  apply(x, y);
  return y;
}

Tridiag& Tridiag::add_scaled(double alpha, const Tridiag& other) {
  assert(other.size() == size());
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] += alpha * other.diag[i];
  for (std::size_t i = 0; i < lower.size(); ++i) {
    lower[i] += alpha * other.lower[i];
    upper[i] += alpha * other.upper[i];
  }
  return *this;
}

double Tridiag::at(std::size_t i, std::size_t j) const {
  if (i == j) return diag[i];
  if (i == j + 1) return lower[j];
  if (j == i + 1) return upper[i];
  return 0.0;
}

TridiagFactor::TridiagFactor(const Tridiag& t)
    : lower_(t.lower), diag_(t.diag), upper_(t.upper) {
  const std::size_t n = diag_.size();
  double scale = 0.0;
  for (double d : diag_) scale = std::max(scale, std::abs(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      // lower_[i-1] becomes the multiplier l_i = T(i,i-1) / u_{i-1}
      lower_[i - 1] /= diag_[i - 1];
      diag_[i] -= lower_[i - 1] * upper_[i - 1];
    }
    if (!(std::abs(diag_[i]) > 1e-14 * scale)) {
      throw SingularMatrixError(fmt::format("tridiagonal pivot {} vanished ({})", i, diag_[i]));
    }
  }
}

void TridiagFactor::solve_in_place(std::span<double> rhs) const {
  const std::size_t n = diag_.size();
  assert(rhs.size() == n);
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) rhs[i] -= lower_[i - 1] * rhs[i - 1];
  rhs[n - 1] /= diag_[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper_[i] * rhs[i + 1]) / diag_[i];
}

std::vector<double> TridiagFactor::solve(std::span<const double> rhs) const {
  std::vector<double> x(rhs.begin(), rhs.end());
  solve_in_place(x);
  return x;
}

BandMatrix::BandMatrix(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(ldab_ * n, 0.0) {}

double& BandMatrix::operator()(std::size_t i, std::size_t j) {
  assert(i < n_ && j < n_ && i + ku_ >= j && j + kl_ >= i);
  return ab_[j * ldab_ + (kl_ + ku_ + i - j)];
}

double BandMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i + ku_ < j || j + kl_ < i) return 0.0;
  return ab_[j * ldab_ + (kl_ + ku_ + i - j)];
}

void BandMatrix::solve_in_place(std::span<double> rhs) {
  assert(rhs.size() == n_);
  std::vector<lapack_int> ipiv(n_);
  const lapack_int info = LAPACKE_dgbsv(
      LAPACK_COL_MAJOR, static_cast<lapack_int>(n_), static_cast<lapack_int>(kl_),
      static_cast<lapack_int>(ku_), 1, ab_.data(), static_cast<lapack_int>(ldab_), ipiv.data(),
      rhs.data(), static_cast<lapack_int>(n_));
  if (info != 0) throw SingularMatrixError(fmt::format("banded LU failed (info={})", info));
}

}  // namespace degdiff::linalg
