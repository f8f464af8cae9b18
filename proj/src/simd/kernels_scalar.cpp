#include "degdiff/simd/kernels.hpp"

namespace degdiff::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double weighted_dot_scalar(const double* w, const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * x[i] * y[i];
  return acc;
}

void tridiag_apply_scalar(const double* lower, const double* diag, const double* upper,
                          const double* x, double* y, std::size_t n) {
  if (n == 0) return;
  if (n == 1) {
    y[0] = diag[0] * x[0];
    return;
  }
  y[0] = diag[0] * x[0] + upper[0] * x[1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    y[i] = lower[i - 1] * x[i - 1] + diag[i] * x[i] + upper[i] * x[i + 1];
  }
  y[n - 1] = lower[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1];
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void pwl_yosida_scalar(const PwlGraph& g, const double* r, double* xi,
                       double* dxi, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) pwl_yosida_point(g, r[i], xi[i], dxi[i]);
}

}  // namespace

namespace detail {
const KernelTable scalar_table{Isa::scalar,         dot_scalar, weighted_dot_scalar,
                               tridiag_apply_scalar, axpy_scalar, pwl_yosida_scalar};
}  // namespace detail

}  // namespace degdiff::simd
