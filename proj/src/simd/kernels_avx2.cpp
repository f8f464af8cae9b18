// AVX2 variants, compiled with -mavx2 only. Products and sums are issued in
// the same order as the scalar reference so elementwise outputs match bit for
// bit; reductions keep four partial sums per register.

#include <immintrin.h>

#include "degdiff/simd/kernels.hpp"

namespace degdiff::simd {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double weighted_dot_avx2(const double* w, const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(wx, _mm256_loadu_pd(y + i)));
  }
  double out = hsum(acc);
  for (; i < n; ++i) out += w[i] * x[i] * y[i];
  return out;
}

void tridiag_apply_avx2(const double* lower, const double* diag, const double* upper,
                        const double* x, double* y, std::size_t n) {
  if (n < 6) {
    detail::scalar_table.tridiag_apply(lower, diag, upper, x, y, n);
    return;
  }
  y[0] = diag[0] * x[0] + upper[0] * x[1];
  std::size_t i = 1;
  for (; i + 4 < n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(lower + i - 1), _mm256_loadu_pd(x + i - 1));
    t = _mm256_add_pd(t, _mm256_mul_pd(_mm256_loadu_pd(diag + i), _mm256_loadu_pd(x + i)));
    t = _mm256_add_pd(t, _mm256_mul_pd(_mm256_loadu_pd(upper + i), _mm256_loadu_pd(x + i + 1)));
    _mm256_storeu_pd(y + i, t);
  }
  for (; i + 1 < n; ++i) {
    y[i] = lower[i - 1] * x[i - 1] + diag[i] * x[i] + upper[i] * x[i + 1];
  }
  y[n - 1] = lower[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(a, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void pwl_yosida_avx2(const PwlGraph& g, const double* r, double* xi, double* dxi, std::size_t n) {
  const __m256d va = _mm256_set1_pd(g.a);
  const __m256d vb = _mm256_set1_pd(g.b);
  const __m256d dlo = _mm256_set1_pd(g.yosida_lo);
  const __m256d dhi = _mm256_set1_pd(g.yosida_hi);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vr = _mm256_loadu_pd(r + i);
    const __m256d below = _mm256_cmp_pd(vr, va, _CMP_LT_OQ);
    const __m256d above = _mm256_andnot_pd(below, _mm256_cmp_pd(vr, vb, _CMP_GE_OQ));
    const __m256d x_lo = _mm256_mul_pd(_mm256_sub_pd(vr, va), dlo);
    const __m256d x_hi = _mm256_mul_pd(_mm256_sub_pd(vr, vb), dhi);
    __m256d x = _mm256_blendv_pd(zero, x_hi, above);
    x = _mm256_blendv_pd(x, x_lo, below);
    __m256d d = _mm256_blendv_pd(zero, dhi, above);
    d = _mm256_blendv_pd(d, dlo, below);
    _mm256_storeu_pd(xi + i, x);
    _mm256_storeu_pd(dxi + i, d);
  }
  for (; i < n; ++i) pwl_yosida_point(g, r[i], xi[i], dxi[i]);
}

}  // namespace

namespace detail {
const KernelTable avx2_table{Isa::avx2,         dot_avx2, weighted_dot_avx2,
                             tridiag_apply_avx2, axpy_avx2, pwl_yosida_avx2};
}  // namespace detail

}  // namespace degdiff::simd
