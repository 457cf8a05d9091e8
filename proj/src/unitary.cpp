#include "ripsample/unitary.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ripsample {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kDenseUnitarityTol = 1e-8;

// exp(+2*pi*i * k / n) with the angle reduced before evaluation.
Complex root_of_unity(std::uint64_t k, std::uint64_t n) {
  return std::polar(1.0, kTwoPi * static_cast<double>(k % n) / static_cast<double>(n));
}

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      static_cast<unsigned __int128>(a) * b % n);
}

// In-place radix-2 FFT with the +i kernel: y_j = sum_l x_l exp(+2 pi i jl/n).
void fft_pow2(ComplexVector& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = kTwoPi / static_cast<double>(len);
    const Complex wl = std::polar(1.0, ang);
    for (std::size_t i = 0; i < n; i += len) {
      Complex w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

void fwht(ComplexVector& a) {
  const std::size_t n = a.size();
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const Complex u = a[j];
        const Complex v = a[j + h];
        a[j] = u + v;
        a[j + h] = u - v;
      }
    }
  }
}

ComplexVector dft_naive(const ComplexVector& x, bool conjugate_kernel) {
  const std::size_t n = x.size();
  std::vector<Complex> roots(n);
  for (std::size_t m = 0; m < n; ++m) {
    roots[m] = root_of_unity(m, n);
    if (conjugate_kernel) roots[m] = std::conj(roots[m]);
  }
  ComplexVector out(n);
  for (std::size_t j = 0; j < n; ++j) {
    Complex acc(0.0);
    for (std::size_t l = 0; l < n; ++l) {
      acc += x[l] * roots[mul_mod(j, l, n)];
    }
    out[j] = acc;
  }
  return out;
}

}  // namespace

std::string to_string(UnitaryKind kind) {
  switch (kind) {
    case UnitaryKind::Dft: return "dft";
    case UnitaryKind::Hadamard: return "hadamard";
    case UnitaryKind::ExplicitDense: return "dense";
  }
  return "unknown";
}

UnitaryKind unitary_kind_from_string(const std::string& name) {
  if (name == "dft") return UnitaryKind::Dft;
  if (name == "hadamard") return UnitaryKind::Hadamard;
  if (name == "dense") return UnitaryKind::ExplicitDense;
  throw std::invalid_argument("unknown unitary kind: " + name);
}

ImplicitUnitary::ImplicitUnitary(UnitaryKind kind, std::size_t n)
    : kind_(kind), n_(n), flatness_(0.0) {}

ImplicitUnitary ImplicitUnitary::dft(std::size_t n) {
  if (n < 1) throw std::invalid_argument("dft: dimension must be >= 1");
  ImplicitUnitary m(UnitaryKind::Dft, n);
  m.flatness_ = 1.0 / std::sqrt(static_cast<double>(n));
  return m;
}

ImplicitUnitary ImplicitUnitary::hadamard(std::size_t n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("hadamard: dimension must be a power of two");
  }
  ImplicitUnitary m(UnitaryKind::Hadamard, n);
  m.flatness_ = 1.0 / std::sqrt(static_cast<double>(n));
  return m;
}

ImplicitUnitary ImplicitUnitary::dense(std::vector<ComplexVector> rows) {
  const std::size_t n = rows.size();
  if (n < 1) throw std::invalid_argument("dense: dimension must be >= 1");
  auto flat = std::make_shared<std::vector<Complex>>();
  flat->reserve(n * n);
  double maxabs = 0.0;
  for (const auto& row : rows) {
    if (row.size() != n) throw std::invalid_argument("dense: matrix must be square");
    if (!all_finite(row)) throw std::invalid_argument("dense: entries must be finite");
    for (const Complex& v : row) {
      maxabs = std::max(maxabs, std::abs(v));
      flat->push_back(v);
    }
  }
  const std::vector<Complex>& a = *flat;
  // Columns of a unitary are orthonormal: check (M* M - I) entrywise.
  for (std::size_t c1 = 0; c1 < n; ++c1) {
    for (std::size_t c2 = c1; c2 < n; ++c2) {
      Complex acc(0.0);
      for (std::size_t r = 0; r < n; ++r) {
        acc += std::conj(a[r * n + c1]) * a[r * n + c2];
      }
      if (c1 == c2) acc -= 1.0;
      if (std::abs(acc) > kDenseUnitarityTol) {
        throw std::invalid_argument("dense: input is not unitary within 1e-8");
      }
    }
  }
  ImplicitUnitary m(UnitaryKind::ExplicitDense, n);
  m.rows_ = std::move(flat);
  m.flatness_ = maxabs;
  return m;
}

ImplicitUnitary make_unitary(UnitaryKind kind, std::size_t n) {
  switch (kind) {
    case UnitaryKind::Dft: return ImplicitUnitary::dft(n);
    case UnitaryKind::Hadamard: return ImplicitUnitary::hadamard(n);
    case UnitaryKind::ExplicitDense:
      throw std::invalid_argument(
          "make_unitary: explicit dense needs entries; use ImplicitUnitary::dense");
  }
  throw std::invalid_argument("make_unitary: unknown kind");
}

Complex ImplicitUnitary::entry(std::size_t row, std::size_t col) const {
  if (row >= n_ || col >= n_) throw std::out_of_range("entry: index out of range");
  switch (kind_) {
    case UnitaryKind::Dft:
      return root_of_unity(mul_mod(row, col, n_), n_) * flatness_;
    case UnitaryKind::Hadamard:
      return Complex((std::popcount(row & col) & 1) ? -flatness_ : flatness_, 0.0);
    case UnitaryKind::ExplicitDense:
      return (*rows_)[row * n_ + col];
  }
  return Complex(0.0);
}

ComplexVector ImplicitUnitary::column(std::size_t col) const {
  if (col >= n_) throw std::out_of_range("column: index out of range");
  ComplexVector out(n_);
  for (std::size_t r = 0; r < n_; ++r) out[r] = entry(r, col);
  return out;
}

ComplexVector ImplicitUnitary::apply(const ComplexVector& x) const {
  require_vector(x, n_, "apply");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
  switch (kind_) {
    case UnitaryKind::Dft: {
      if (is_power_of_two(n_)) {
        ComplexVector y = x;
        fft_pow2(y);
        for (Complex& v : y) v *= scale;
        return y;
      }
      ComplexVector y = dft_naive(x, false);
      for (Complex& v : y) v *= scale;
      return y;
    }
    case UnitaryKind::Hadamard: {
      ComplexVector y = x;
      fwht(y);
      for (Complex& v : y) v *= scale;
      return y;
    }
    case UnitaryKind::ExplicitDense: {
      const std::vector<Complex>& a = *rows_;
      ComplexVector y(n_, Complex(0.0));
      for (std::size_t r = 0; r < n_; ++r) {
        Complex acc(0.0);
        const Complex* row = a.data() + r * n_;
        for (std::size_t c = 0; c < n_; ++c) acc += row[c] * x[c];
        y[r] = acc;
      }
      return y;
    }
  }
  return {};
}

ComplexVector ImplicitUnitary::apply_adjoint(const ComplexVector& y) const {
  require_vector(y, n_, "apply_adjoint");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
  switch (kind_) {
    case UnitaryKind::Dft: {
      // Conjugated kernel: conj(M conj(y)).
      ComplexVector t(n_);
      for (std::size_t i = 0; i < n_; ++i) t[i] = std::conj(y[i]);
      if (is_power_of_two(n_)) {
        fft_pow2(t);
        for (Complex& v : t) v = std::conj(v) * scale;
        return t;
      }
      ComplexVector out = dft_naive(t, false);
      for (Complex& v : out) v = std::conj(v) * scale;
      return out;
    }
    case UnitaryKind::Hadamard:
      return apply(y);  // real symmetric
    case UnitaryKind::ExplicitDense: {
      const std::vector<Complex>& a = *rows_;
      ComplexVector out(n_, Complex(0.0));
      for (std::size_t r = 0; r < n_; ++r) {
        const Complex yr = y[r];
        const Complex* row = a.data() + r * n_;
        for (std::size_t c = 0; c < n_; ++c) out[c] += std::conj(row[c]) * yr;
      }
      return out;
    }
  }
  return {};
}

Complex parse_complex_entry(const std::string& token) {
  if (token.empty()) throw std::invalid_argument("empty matrix entry");
  std::string s = token;
  bool has_j = false;
  if (s.back() == 'j' || s.back() == 'J' || s.back() == 'i' || s.back() == 'I') {
    has_j = true;
    s.pop_back();
    if (s.empty() || s == "+" || s == "-") s += "1";
  }
  // Split at the last sign that is not a leading sign or an exponent sign.
  std::size_t split = std::string::npos;
  for (std::size_t i = s.size(); i-- > 1;) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  const auto to_double = [](const std::string& part) {
    std::size_t pos = 0;
    double v = std::stod(part, &pos);
    if (pos != part.size()) throw std::invalid_argument("bad matrix entry: " + part);
    return v;
  };
  if (!has_j) {
    if (split != std::string::npos) throw std::invalid_argument("bad matrix entry: " + token);
    return Complex(to_double(s), 0.0);
  }
  if (split == std::string::npos) return Complex(0.0, to_double(s));
  std::string im = s.substr(split);
  if (im == "+" || im == "-") im += "1";
  return Complex(to_double(s.substr(0, split)), to_double(im));
}

std::string format_complex_entry(const Complex& z) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g%+.17gj", z.real(), z.imag());
  return buf;
}

ImplicitUnitary load_dense_unitary(std::istream& in) {
  std::vector<ComplexVector> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    ComplexVector row;
    std::string token;
    for (char c : line) {
      if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
        if (!token.empty()) {
          row.push_back(parse_complex_entry(token));
          token.clear();
        }
      } else {
        token += c;
      }
    }
    if (!token.empty()) row.push_back(parse_complex_entry(token));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("load_dense_unitary: no rows");
  return ImplicitUnitary::dense(std::move(rows));
}

ImplicitUnitary load_dense_unitary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open matrix file: " + path);
  return load_dense_unitary(in);
}

void save_dense_unitary(std::ostream& out, const ImplicitUnitary& m) {
  const std::size_t n = m.dim();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (c) out << ',';
      out << format_complex_entry(m.entry(r, c));
    }
    out << '\n';
  }
}

}  // namespace ripsample
