#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace ripsample {

// Knuth two-sum: s + e == a + b exactly under round-to-nearest.
inline std::pair<double, double> two_sum(double a, double b) {
  const double s = a + b;
  const double bv = s - a;
  const double av = s - bv;
  const double e = (a - av) + (b - bv);
  return {s, e};
}

// d + e == a - b exactly.
inline std::pair<double, double> two_diff(double a, double b) {
  return two_sum(a, -b);
}

// Maintains a running sum of doubles as a nonoverlapping expansion
// (Shewchuk's grow-expansion with zero elimination), so the accumulated
// value is the exact real-number sum of everything added.
class ExactSum {
 public:
  void add(double x) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < size_; ++i) {
      auto [s, e] = two_sum(x, terms_[i]);
      if (e != 0.0) terms_[out++] = e;
      x = s;
    }
    if (x != 0.0 || out == 0) {
      if (out >= kCapacity) throw std::length_error("ExactSum overflow");
      terms_[out++] = x;
    }
    size_ = out;
  }

  // True iff the exact accumulated sum equals zero.
  bool is_zero() const {
    for (std::size_t i = 0; i < size_; ++i) {
      if (terms_[i] != 0.0) return false;
    }
    return true;
  }

  double value() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size_; ++i) s += terms_[i];
    return s;
  }

 private:
  static constexpr std::size_t kCapacity = 64;
  double terms_[kCapacity] = {};
  std::size_t size_ = 0;
};

}  // namespace ripsample
