#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace spmtl {

// One SplitMix64 mixing round. Used to derive substream seeds.
inline std::uint64_t splitmix64(std::uint64_t state) {
  std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// Seeded random stream with a fixed, cross-platform draw sequence.
///
/// std::mt19937_64 output is fully specified by the standard; the mappings
/// below avoid the implementation-defined std:: distributions so the same
/// seed produces the same bytes everywhere:
///   - uniform(): top 53 bits -> [0, 1)
///   - normal(): Box-Muller, consumes exactly two 64-bit draws
///   - bounded(n): 64-bit draw, rejected above the largest multiple of n
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal() {
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 =
        static_cast<double>(next_u64() >> 11) * 0x1.0p-53;  // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t bounded(std::uint64_t bound) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::mt19937_64 engine_;
};

}  // namespace spmtl
