#include <cstdlib>
#include <stdexcept>
#include <string>

#include "stylo/simd/kernels.hpp"

namespace stylo::simd {

namespace {

const Kernels kScalar{Isa::scalar, &scalar::dot, &scalar::squared_distance, &scalar::axpy,
                      &scalar::scale};

#if defined(STYLO_HAVE_AVX2)
const Kernels kAvx2{Isa::avx2, &avx2::dot, &avx2::squared_distance, &avx2::axpy, &avx2::scale};
#endif

const Kernels& select() {
  const char* forced = std::getenv("STYLO_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") return kScalar;
  if (isa_supported(Isa::avx2)) return kernels_for(Isa::avx2);
  return kScalar;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd kernel: length mismatch");
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(STYLO_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("simd: instruction set not available: " + std::string(isa_name(isa)));
  }
#if defined(STYLO_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2;
#endif
  return kScalar;
}

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

}  // namespace stylo::simd
