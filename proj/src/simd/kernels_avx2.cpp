// Compiled with -mavx2 (and without -mfma); only called after a runtime
// CPU check.
#include "stylo/simd/kernels.hpp"

#include <immintrin.h>

namespace stylo::simd::avx2 {

namespace {

inline double fold(__m256d lo, __m256d hi) {
  __m256d t = _mm256_add_pd(lo, hi);  // t[j] = s[j] + s[j + 4]
  __m128d t01 = _mm256_castpd256_pd128(t);
  __m128d t23 = _mm256_extractf128_pd(t, 1);
  double t0 = _mm_cvtsd_f64(t01);
  double t1 = _mm_cvtsd_f64(_mm_unpackhi_pd(t01, t01));
  double t2 = _mm_cvtsd_f64(t23);
  double t3 = _mm_cvtsd_f64(_mm_unpackhi_pd(t23, t23));
  return (t0 + t1) + (t2 + t3);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s_lo = _mm256_setzero_pd();
  __m256d s_hi = _mm256_setzero_pd();
  std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    __m256d p_lo = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    __m256d p_hi = _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    s_lo = _mm256_add_pd(s_lo, p_lo);
    s_hi = _mm256_add_pd(s_hi, p_hi);
  }
  double r = fold(s_lo, s_hi);
  for (std::size_t i = body; i < n; ++i) {
    double p = a[i] * b[i];
    r = r + p;
  }
  return r;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d s_lo = _mm256_setzero_pd();
  __m256d s_hi = _mm256_setzero_pd();
  std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    __m256d d_lo = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    __m256d d_hi = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    s_lo = _mm256_add_pd(s_lo, _mm256_mul_pd(d_lo, d_lo));
    s_hi = _mm256_add_pd(s_hi, _mm256_mul_pd(d_hi, d_hi));
  }
  double r = fold(s_lo, s_hi);
  for (std::size_t i = body; i < n; ++i) {
    double d = a[i] - b[i];
    double p = d * d;
    r = r + p;
  }
  return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (std::size_t i = body; i < n; ++i) {
    double p = alpha * x[i];
    y[i] = y[i] + p;
  }
}

void scale(double alpha, double* x, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (std::size_t i = body; i < n; ++i) x[i] = alpha * x[i];
}

}  // namespace stylo::simd::avx2
