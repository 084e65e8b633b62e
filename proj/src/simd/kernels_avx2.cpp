// Built with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "coin/simd.hpp"

namespace coin::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const float* x, const float* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 xv = _mm256_loadu_ps(x + i);
    __m256 yv = _mm256_loadu_ps(y + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xv)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(yv)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1)), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
  return s;
}

Dot3 dot3_avx2(const float* x, const float* a, const float* b, std::size_t n) {
  __m256d xa = _mm256_setzero_pd();
  __m256d xb = _mm256_setzero_pd();
  __m256d xx = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    xa = _mm256_fmadd_pd(xv, _mm256_cvtps_pd(_mm_loadu_ps(a + i)), xa);
    xb = _mm256_fmadd_pd(xv, _mm256_cvtps_pd(_mm_loadu_ps(b + i)), xb);
    xx = _mm256_fmadd_pd(xv, xv, xx);
  }
  Dot3 d{hsum(xa), hsum(xb), hsum(xx)};
  for (; i < n; ++i) {
    const double xi = x[i];
    d.xa += xi * a[i];
    d.xb += xi * b[i];
    d.xx += xi * xi;
  }
  return d;
}

void axpy_avx2(double alpha, const float* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_cvtps_pd(_mm_loadu_ps(x + i)), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_rows_avx2(const double* k0, const double* k1, double v0, double v1, double r,
                     double* u, std::size_t n) {
  const __m256d v0v = _mm256_set1_pd(v0);
  const __m256d v1v = _mm256_set1_pd(v1);
  const __m256d rv = _mm256_set1_pd(r);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d den = _mm256_fmadd_pd(_mm256_loadu_pd(k0 + i), v0v,
                                  _mm256_mul_pd(_mm256_loadu_pd(k1 + i), v1v));
    _mm256_storeu_pd(u + i, _mm256_div_pd(rv, den));
  }
  for (; i < n; ++i) u[i] = r / (k0[i] * v0 + k1[i] * v1);
}

ColSums col_sums_avx2(const double* k0, const double* k1, const double* u, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d uv = _mm256_loadu_pd(u + i);
    s0 = _mm256_fmadd_pd(uv, _mm256_loadu_pd(k0 + i), s0);
    s1 = _mm256_fmadd_pd(uv, _mm256_loadu_pd(k1 + i), s1);
  }
  ColSums s{hsum(s0), hsum(s1)};
  for (; i < n; ++i) {
    s.c0 += u[i] * k0[i];
    s.c1 += u[i] * k1[i];
  }
  return s;
}

double row_residual_avx2(const double* k0, const double* k1, const double* u, double v0,
                         double v1, double r, std::size_t n) {
  const __m256d v0v = _mm256_set1_pd(v0);
  const __m256d v1v = _mm256_set1_pd(v1);
  const __m256d rv = _mm256_set1_pd(r);
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d row = _mm256_fmadd_pd(_mm256_loadu_pd(k0 + i), v0v,
                                  _mm256_mul_pd(_mm256_loadu_pd(k1 + i), v1v));
    __m256d diff = _mm256_sub_pd(_mm256_mul_pd(_mm256_loadu_pd(u + i), row), rv);
    m = _mm256_add_pd(m, _mm256_andnot_pd(sign, diff));
  }
  double out = hsum(m);
  for (; i < n; ++i) out += std::abs(u[i] * (k0[i] * v0 + k1[i] * v1) - r);
  return out;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2",          dot_avx2,        dot3_avx2,
                                 axpy_avx2,       scale_rows_avx2, col_sums_avx2,
                                 row_residual_avx2};
  return table;
}

}  // namespace coin::simd
