#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "stylo/rng.hpp"
#include "stylo/simd/kernels.hpp"

using namespace stylo;
using namespace stylo::simd;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  // Wide dynamic range so rounding differences would show.
  for (auto& x : v) x = rng.normal() * std::ldexp(1.0, static_cast<int>(rng.below(40)) - 20);
  return v;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

// Textbook loops with the documented association order.
double oracle_dot(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  const std::size_t body = n - n % 8;
  double s[8] = {};
  for (std::size_t i = 0; i < body; ++i) s[i % 8] += a[i] * b[i];
  double t[4];
  for (int j = 0; j < 4; ++j) t[j] = s[j] + s[j + 4];
  double r = (t[0] + t[1]) + (t[2] + t[3]);
  for (std::size_t i = body; i < n; ++i) r += a[i] * b[i];
  return r;
}

}  // namespace

TEST_CASE("scalar kernels follow the documented reduction order") {
  Rng rng(11);
  for (std::size_t n : {0, 1, 7, 8, 9, 15, 16, 17, 63, 64, 100, 257}) {
    auto a = random_vector(rng, n);
    auto b = random_vector(rng, n);
    CHECK(same_bits(scalar::dot(a.data(), b.data(), n), oracle_dot(a, b)));
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    CHECK(same_bits(scalar::squared_distance(a.data(), b.data(), n), oracle_dot(diff, diff)));
  }
}

TEST_CASE("every supported ISA is bit-identical to the scalar reference") {
  Rng rng(2024);
  for (Isa isa : {Isa::scalar, Isa::avx2}) {
    if (!isa_supported(isa)) {
      MESSAGE("skipping unsupported ISA " << isa_name(isa));
      continue;
    }
    const Kernels& k = kernels_for(isa);
    CHECK(k.isa == isa);
    for (int trial = 0; trial < 500; ++trial) {
      std::size_t n = rng.below(300);
      auto a = random_vector(rng, n);
      auto b = random_vector(rng, n);
      CHECK(same_bits(k.dot(a.data(), b.data(), n), scalar::dot(a.data(), b.data(), n)));
      CHECK(same_bits(k.squared_distance(a.data(), b.data(), n), scalar::squared_distance(a.data(), b.data(), n)));
      double alpha = rng.normal();
      auto y1 = b;
      auto y2 = b;
      k.axpy(alpha, a.data(), y1.data(), n);
      scalar::axpy(alpha, a.data(), y2.data(), n);
      CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(double)) == 0);
      k.scale(alpha, y1.data(), n);
      scalar::scale(alpha, y2.data(), n);
      CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("span wrappers validate lengths and use the active table") {
  std::vector<double> a{1, 2, 3};
  std::vector<double> b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  CHECK(squared_distance(a, b) == 27.0);
  std::vector<double> y{1, 1, 1};
  axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
  scale(0.5, y);
  CHECK(y == std::vector<double>{1.5, 2.5, 3.5});
  std::vector<double> shorter{1, 2};
  CHECK_THROWS_AS(dot(a, shorter), std::invalid_argument);
  CHECK_THROWS_AS(axpy(1.0, shorter, y), std::invalid_argument);
  CHECK(isa_supported(Isa::scalar));
  CHECK((active().isa == Isa::scalar || isa_supported(active().isa)));
}

TEST_CASE("unsupported ISA requests are rejected") {
  if (!isa_supported(Isa::avx2)) {
    CHECK_THROWS_AS(kernels_for(Isa::avx2), std::invalid_argument);
  } else {
    CHECK(kernels_for(Isa::avx2).isa == Isa::avx2);
  }
}
