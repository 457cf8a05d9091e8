#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ripsample {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

// Asymmetric two-sided band: x approximates y when
//   (1 - eps) * y - alpha <= x <= (1 + eps) * y + alpha.
// eps scales with y, so the relative part is meaningful for y >= 0.
struct ApproxSpec {
  double eps = 0.0;
  double alpha = 0.0;
};

inline bool approx_within(double x, double y, const ApproxSpec& spec) {
  return (1.0 - spec.eps) * y - spec.alpha <= x && x <= (1.0 + spec.eps) * y + spec.alpha;
}

inline double norm1(const ComplexVector& x) {
  double s = 0.0;
  for (const Complex& v : x) s += std::abs(v);
  return s;
}

inline double norm2_squared(const ComplexVector& x) {
  double s = 0.0;
  for (const Complex& v : x) s += std::norm(v);
  return s;
}

inline double norm2(const ComplexVector& x) { return std::sqrt(norm2_squared(x)); }

inline bool all_finite(const ComplexVector& x) {
  for (const Complex& v : x) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

inline void require_vector(const ComplexVector& x, std::size_t dim, const char* what) {
  if (x.size() != dim) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace ripsample
