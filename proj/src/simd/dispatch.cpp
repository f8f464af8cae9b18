#include <atomic>
#include <cassert>
#include <stdexcept>
#include <string>

#include "degdiff/simd/kernels.hpp"

namespace degdiff::simd {
namespace {

bool cpu_has_avx2() {
#if defined(DEGDIFF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* best_table() {
#if defined(DEGDIFF_HAVE_AVX2)
  if (cpu_has_avx2()) return &detail::avx2_table;
#endif
  return &detail::scalar_table;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{best_table()};
  return ptr;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return cpu_has_avx2();
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw std::runtime_error("kernel ISA not available: " + std::string(isa_name(isa)));
  }
#if defined(DEGDIFF_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return active().dot(x.data(), y.data(), x.size());
}

double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y) {
  assert(w.size() == x.size() && x.size() == y.size());
  return active().weighted_dot(w.data(), x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace degdiff::simd
