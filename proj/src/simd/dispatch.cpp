#include "deform/simd.hpp"

#include <atomic>
#include <cassert>

namespace deform::simd {

#ifndef DEFORM_HAVE_AVX2_TU
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { scalar::axpy(a, x, y, n); }
void scale(double a, const double* x, double* y, std::size_t n) { scalar::scale(a, x, y, n); }
double max_abs(const double* x, std::size_t n) { return scalar::max_abs(x, n); }
void central_difference(const double* x, std::size_t offset, double factor,
                        std::size_t begin, std::size_t end, double* out) {
  scalar::central_difference(x, offset, factor, begin, end, out);
}
}  // namespace avx2
#endif

bool avx2_available() {
#if defined(DEFORM_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = __builtin_cpu_supports("avx2");
  return has;
#else
  return false;
#endif
}

namespace {
std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{avx2_available() ? Isa::Avx2 : Isa::Scalar};
  return isa;
}
}  // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return active_isa() == Isa::Avx2 ? avx2::dot(x.data(), y.data(), x.size())
                                   : scalar::dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  if (active_isa() == Isa::Avx2) avx2::axpy(a, x.data(), y.data(), x.size());
  else scalar::axpy(a, x.data(), y.data(), x.size());
}

void scale(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  if (active_isa() == Isa::Avx2) avx2::scale(a, x.data(), y.data(), x.size());
  else scalar::scale(a, x.data(), y.data(), x.size());
}

double max_abs(std::span<const double> x) {
  return active_isa() == Isa::Avx2 ? avx2::max_abs(x.data(), x.size())
                                   : scalar::max_abs(x.data(), x.size());
}

void central_difference(std::span<const double> x, std::size_t offset, double factor,
                        std::size_t begin, std::size_t end, std::span<double> out) {
  assert(begin >= offset && end + offset <= x.size() && out.size() >= end);
  if (active_isa() == Isa::Avx2)
    avx2::central_difference(x.data(), offset, factor, begin, end, out.data());
  else
    scalar::central_difference(x.data(), offset, factor, begin, end, out.data());
}

}  // namespace deform::simd
