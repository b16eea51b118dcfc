#include "stylo/simd/kernels.hpp"

namespace stylo::simd::scalar {

namespace {

// Fold of the eight lane sums; mirrors the AVX2 horizontal reduction.
inline double fold(const double s[8]) {
  double t0 = s[0] + s[4];
  double t1 = s[1] + s[5];
  double t2 = s[2] + s[6];
  double t3 = s[3] + s[7];
  return (t0 + t1) + (t2 + t3);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) {
      double p = a[i + j] * b[i + j];
      s[j] = s[j] + p;
    }
  }
  double r = fold(s);
  for (std::size_t i = body; i < n; ++i) {
    double p = a[i] * b[i];
    r = r + p;
  }
  return r;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) {
      double d = a[i + j] - b[i + j];
      double p = d * d;
      s[j] = s[j] + p;
    }
  }
  double r = fold(s);
  for (std::size_t i = body; i < n; ++i) {
    double d = a[i] - b[i];
    double p = d * d;
    r = r + p;
  }
  return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double p = alpha * x[i];
    y[i] = y[i] + p;
  }
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = alpha * x[i];
}

}  // namespace stylo::simd::scalar
