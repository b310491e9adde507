#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace icurv {

// Deterministic, platform-independent random stream (splitmix64). All
// stochastic choices in the library flow from a single 64-bit seed so that
// identical configs reproduce identical results bit for bit.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
  }

  // Standard normal via Box-Muller (no cached spare: keeps the stream
  // position independent of call parity).
  double next_gaussian() {
    double u1 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
  std::uint64_t state_;
};

// Derives an independent child seed from (seed, tag, index). Used to give
// every grid point / multistart its own reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  RandomStream mix(seed ^ h ^ (index * 0x9E3779B97F4A7C15ull + 0x1234567ull));
  return mix.next_u64();
}

}  // namespace icurv
