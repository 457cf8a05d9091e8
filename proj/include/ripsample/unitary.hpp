#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ripsample/linalg.hpp"

namespace ripsample {

enum class UnitaryKind { Dft, Hadamard, ExplicitDense };

std::string to_string(UnitaryKind kind);
UnitaryKind unitary_kind_from_string(const std::string& name);

// N x N unitary given implicitly (DFT, Hadamard) or by explicit entries.
// Immutable after construction; safe to share across threads.
//
// Conventions:
//   Dft:      entry(j, l) = exp(+2*pi*i * j*l / N) / sqrt(N), any N >= 1.
//   Hadamard: entry(j, l) = (-1)^<bits(j), bits(l)> / sqrt(N), N a power of two.
//   Dense:    entries validated against max |(M* M - I)_{jl}| <= 1e-8.
class ImplicitUnitary {
 public:
  static ImplicitUnitary dft(std::size_t n);
  static ImplicitUnitary hadamard(std::size_t n);
  static ImplicitUnitary dense(std::vector<ComplexVector> rows);

  std::size_t dim() const { return n_; }
  UnitaryKind kind() const { return kind_; }

  Complex entry(std::size_t row, std::size_t col) const;
  ComplexVector column(std::size_t col) const;

  // max_{j,l} |entry(j, l)|; exactly 1/sqrt(N) for the implicit kinds.
  double flatness() const { return flatness_; }

  // M x. Dft uses a radix-2 FFT when N is a power of two and direct
  // summation otherwise; Hadamard uses the fast Walsh-Hadamard butterfly.
  ComplexVector apply(const ComplexVector& x) const;

  // M* y (the inverse, since M is unitary).
  ComplexVector apply_adjoint(const ComplexVector& y) const;

 private:
  ImplicitUnitary(UnitaryKind kind, std::size_t n);

  UnitaryKind kind_;
  std::size_t n_;
  double flatness_;
  std::shared_ptr<const std::vector<Complex>> rows_;  // row-major, dense only
};

// Dft/Hadamard factory matching the kind tag; ExplicitDense requires entries
// and is rejected here (use ImplicitUnitary::dense).
ImplicitUnitary make_unitary(UnitaryKind kind, std::size_t n);

// Text format: one matrix row per line, entries separated by commas or
// whitespace, each entry "re", "imj" or "re+imj" (e.g. "0.5-0.25j").
// Lines that are blank or start with '#' are skipped.
ImplicitUnitary load_dense_unitary(std::istream& in);
ImplicitUnitary load_dense_unitary_file(const std::string& path);
void save_dense_unitary(std::ostream& out, const ImplicitUnitary& m);

Complex parse_complex_entry(const std::string& token);
std::string format_complex_entry(const Complex& z);

}  // namespace ripsample
