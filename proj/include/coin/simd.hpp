#pragma once

#include <cstddef>
#include <string_view>

namespace coin::simd {

struct Dot3 {
  double xa = 0.0;
  double xb = 0.0;
  double xx = 0.0;
};

struct ColSums {
  double c0 = 0.0;
  double c1 = 0.0;
};

// Hot loops with a scalar reference and optional vector variants. Every
// variant accumulates in double; variants differ only in summation order.
struct KernelTable {
  std::string_view name;
  double (*dot)(const float* x, const float* y, std::size_t n);
  // x.a, x.b and x.x in one pass over x.
  Dot3 (*dot3)(const float* x, const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const float* x, double* y, std::size_t n);
  // Two-column Sinkhorn row step: u[i] = r / (k0[i] v0 + k1[i] v1).
  void (*scale_rows)(const double* k0, const double* k1, double v0, double v1, double r,
                     double* u, std::size_t n);
  // (sum_i u[i] k0[i], sum_i u[i] k1[i])
  ColSums (*col_sums)(const double* k0, const double* k1, const double* u, std::size_t n);
  // sum_i |u[i] (k0[i] v0 + k1[i] v1) - r|  (L1 row-marginal violation)
  double (*row_residual)(const double* k0, const double* k1, const double* u, double v0,
                         double v1, double r, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();

// Best table for this CPU; COIN_SIMD=scalar in the environment forces the
// reference path. Resolved once.
const KernelTable& active();

}  // namespace coin::simd
