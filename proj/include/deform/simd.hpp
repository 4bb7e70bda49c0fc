#pragma once
// Data-parallel kernels used by the grid stencils and the optimizer.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2
// variant is compiled into a separate translation unit and selected at
// runtime when the CPU reports AVX2. Elementwise kernels are bit-identical
// between variants; reductions (dot) differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace deform::simd {

enum class Isa { Scalar, Avx2 };

/// Instruction set used by the dispatching entry points below.
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Force a particular variant (tests use this to compare implementations).
/// Requesting Avx2 on a machine without it falls back to Scalar.
void set_isa(Isa isa);
bool avx2_available();

double dot(std::span<const double> x, std::span<const double> y);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
/// y = x * a
void scale(double a, std::span<const double> x, std::span<double> y);
double max_abs(std::span<const double> x);
/// out[i] = (x[i + offset] - x[i - offset]) * factor for i in [begin, end).
/// `out` is indexed like `x`.
void central_difference(std::span<const double> x, std::size_t offset,
                        double factor, std::size_t begin, std::size_t end,
                        std::span<double> out);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(double a, const double* x, double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
void central_difference(const double* x, std::size_t offset, double factor,
                        std::size_t begin, std::size_t end, double* out);
}  // namespace scalar

namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(double a, const double* x, double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
void central_difference(const double* x, std::size_t offset, double factor,
                        std::size_t begin, std::size_t end, double* out);
}  // namespace avx2

}  // namespace deform::simd
