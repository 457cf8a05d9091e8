#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace ripsample {

// Identifier recorded in experiment outputs so runs can be replayed.
// Seeds are mixed with the splitmix64 finalizer; draws come from the
// standard mt19937_64 engine. Integer and real mappings are implemented
// here rather than with std::*_distribution, whose output is
// implementation-defined and would break cross-platform replay.
inline constexpr std::string_view kRngAlgorithm = "splitmix64+mt19937_64";

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Independent child stream; derive(s) is stable under the parent's draw state.
  Rng derive(std::uint64_t stream) const {
    return Rng(detail::splitmix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}, unbiased via rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    std::uint64_t mask = n - 1;
    mask |= mask >> 1; mask |= mask >> 2; mask |= mask >> 4;
    mask |= mask >> 8; mask |= mask >> 16; mask |= mask >> 32;
    std::uint64_t v;
    do { v = next_u64() & mask; } while (v >= n);
    return v;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; one fresh pair per two calls.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do { u1 = next_double(); } while (u1 <= 0.0);
    u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::complex<double> complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ripsample
