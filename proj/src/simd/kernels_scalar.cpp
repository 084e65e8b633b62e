#include <algorithm>
#include <cmath>

#include "coin/simd.hpp"

namespace coin::simd {
namespace {

double dot_scalar(const float* x, const float* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
  return s;
}

Dot3 dot3_scalar(const float* x, const float* a, const float* b, std::size_t n) {
  Dot3 d;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    d.xa += xi * a[i];
    d.xb += xi * b[i];
    d.xx += xi * xi;
  }
  return d;
}

void axpy_scalar(double alpha, const float* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_rows_scalar(const double* k0, const double* k1, double v0, double v1, double r,
                       double* u, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) u[i] = r / (k0[i] * v0 + k1[i] * v1);
}

ColSums col_sums_scalar(const double* k0, const double* k1, const double* u, std::size_t n) {
  ColSums s;
  for (std::size_t i = 0; i < n; ++i) {
    s.c0 += u[i] * k0[i];
    s.c1 += u[i] * k1[i];
  }
  return s;
}

double row_residual_scalar(const double* k0, const double* k1, const double* u, double v0,
                           double v1, double r, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(u[i] * (k0[i] * v0 + k1[i] * v1) - r);
  return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",          dot_scalar,        dot3_scalar,
                                 axpy_scalar,       scale_rows_scalar, col_sums_scalar,
                                 row_residual_scalar};
  return table;
}

}  // namespace coin::simd
