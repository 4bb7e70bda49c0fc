#include "deform/simd.hpp"

#include <cmath>

namespace deform::simd::scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * a;
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
  return m;
}

void central_difference(const double* x, std::size_t offset, double factor,
                        std::size_t begin, std::size_t end, double* out) {
  for (std::size_t i = begin; i < end; ++i)
    out[i] = (x[i + offset] - x[i - offset]) * factor;
}

}  // namespace deform::simd::scalar
