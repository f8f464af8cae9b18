#pragma once

// Tridiagonal and banded matrices for the 1D operators.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace degdiff::linalg {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tridiag {
  std::vector<double> lower;  // n-1 entries, lower[i] = T(i+1, i)
  std::vector<double> diag;   // n entries
  std::vector<double> upper;  // n-1 entries, upper[i] = T(i, i+1)

  static Tridiag zeros(std::size_t n);

  std::size_t size() const { return diag.size(); }

  /// y = T x through the active SIMD table.
  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(std::span<const double> x) const;

  /// this += alpha * other
  Tridiag& add_scaled(double alpha, const Tridiag& other);

  double at(std::size_t i, std::size_t j) const;
};

/// Thomas factorization (no pivoting). Stable for matrices that are diagonally
/// dominant by rows or columns, or symmetric positive definite.
class TridiagFactor {
 public:
  explicit TridiagFactor(const Tridiag& t);

  void solve_in_place(std::span<double> rhs) const;
  std::vector<double> solve(std::span<const double> rhs) const;
  std::size_t size() const { return diag_.size(); }

 private:
  std::vector<double> lower_;
  std::vector<double> diag_;  // pivots
  std::vector<double> upper_;
};

/// General band matrix in LAPACK band storage with room for pivoting fill-in.
class BandMatrix {
 public:
  BandMatrix(std::size_t n, std::size_t kl, std::size_t ku);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j);
  double operator()(std::size_t i, std::size_t j) const;

  /// Solves A x = rhs in place by LU with partial pivoting. Destroys the matrix.
  void solve_in_place(std::span<double> rhs);

 private:
  std::size_t n_;
  std::size_t kl_;
  std::size_t ku_;
  std::size_t ldab_;
  std::vector<double> ab_;
};

}  // namespace degdiff::linalg
