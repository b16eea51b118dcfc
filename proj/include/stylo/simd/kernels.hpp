#pragma once

// Dense double-precision kernels used by the linear and metric-learning
// inner loops.
//
// Every reduction uses the same association order in every variant: eight
// partial sums (lane j accumulates elements i with i % 8 == j over the
// largest multiple-of-8 prefix), folded as t[j] = s[j] + s[j + 4] and then
// (t0 + t1) + (t2 + t3), followed by the tail elements in index order. No
// fused multiply-adds. The scalar and AVX2 variants therefore produce
// bit-identical results, which the equivalence tests assert exactly.

#include <cstddef>
#include <span>
#include <string_view>

namespace stylo::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Table of kernel entry points for one instruction set.
struct Kernels {
  Isa isa;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
};

/// Kernels for `isa`. Throws std::invalid_argument if the CPU lacks it.
const Kernels& kernels_for(Isa isa);

/// Whether the running CPU (and this build) can execute `isa`.
bool isa_supported(Isa isa);

/// Active kernels, chosen once: AVX2 when available unless the environment
/// variable STYLO_SIMD=scalar forces the reference path.
const Kernels& active();

// Convenience wrappers over the active kernel table.
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
}  // namespace scalar

#if defined(STYLO_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace stylo::simd
