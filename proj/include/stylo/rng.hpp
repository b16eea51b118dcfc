#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace stylo {

/// Deterministic PRNG (xoshiro256**) seeded through splitmix64.
///
/// The standard library distributions are implementation-defined, so every
/// draw the toolkit makes goes through the helpers below. That keeps seeded
/// results identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for a named stage ("split", "init", ...). Changing
  /// how much one stage draws never perturbs another.
  static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
/// 64-bit FNV-1a; used to fold names and ids into seeds.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace stylo
