#pragma once

// Data-parallel inner loops used by the FEM layer and the solvers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The active table is chosen once at first use from the CPU's
// reported features and can be overridden with select(). Elementwise kernels
// (tridiag_apply, axpy, pwl_yosida) produce bit-identical results on every
// ISA; reductions (dot, weighted_dot) differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace degdiff::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Piecewise-linear monotone graph in the form
///   beta(s) = k_lo (s - a)  for s < a,   0 on [a, b],   k_hi (s - b) for s > b.
/// An infinite slope encodes a vertical segment (obstacle). For a fixed lambda,
/// contraction_lo/hi hold 1 / (1 + lambda k) (0 for an infinite slope) and
/// yosida_lo/hi hold k / (1 + lambda k) (1 / lambda for an infinite slope).
/// Storing the Yosida slope directly avoids forming (r - J) / lambda, which
/// cancels badly for small lambda.
struct PwlGraph {
  double a = 0.0;
  double b = 0.0;
  double contraction_lo = 1.0;
  double contraction_hi = 1.0;
  double yosida_lo = 1.0;
  double yosida_hi = 1.0;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*weighted_dot)(const double* w, const double* x, const double* y, std::size_t n);
  // y = T x for a tridiagonal T given by its three diagonals.
  void (*tridiag_apply)(const double* lower, const double* diag, const double* upper,
                        const double* x, double* y, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // Resolvent-based Yosida value and derivative of a PwlGraph, nodewise.
  void (*pwl_yosida)(const PwlGraph& g, const double* r, double* xi, double* dxi, std::size_t n);
};

bool isa_available(Isa isa);

/// Table for a specific ISA; throws std::runtime_error if the CPU or build lacks it.
const KernelTable& table(Isa isa);

/// Currently selected table (best available unless select() was called).
const KernelTable& active();

/// Force a specific ISA for subsequent active() calls.
void select(Isa isa);

// Scalar per-point formulas shared by every variant. At r == b the upper
// branch is taken, so a degenerate plateau (a == b) still reports the slope.
inline double pwl_resolvent_point(const PwlGraph& g, double r) {
  if (r < g.a) return g.a + (r - g.a) * g.contraction_lo;
  if (r >= g.b) return g.b + (r - g.b) * g.contraction_hi;
  return r;
}

inline void pwl_yosida_point(const PwlGraph& g, double r, double& xi, double& dxi) {
  if (r < g.a) {
    xi = (r - g.a) * g.yosida_lo;
    dxi = g.yosida_lo;
  } else if (r >= g.b) {
    xi = (r - g.b) * g.yosida_hi;
    dxi = g.yosida_hi;
  } else {
    xi = 0.0;
    dxi = 0.0;
  }
}

// span conveniences over active()
double dot(std::span<const double> x, std::span<const double> y);
double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace detail {
extern const KernelTable scalar_table;
#if defined(DEGDIFF_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace degdiff::simd
