#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "ripsample/linalg.hpp"
#include "ripsample/unitary.hpp"

namespace ripsample {

// Multiset of q row indices of an N-dimensional unitary, drawn independently
// and uniformly with replacement (duplicates allowed, q may exceed N).
// The associated operator scale is sqrt(N/q).
struct RowSample {
  std::size_t ambient_dim = 0;          // N
  std::vector<std::size_t> indices;     // q entries in [0, N)
  std::uint64_t seed = 0;               // 0 when constructed explicitly

  std::size_t q() const { return indices.size(); }
  double scale() const;
};

RowSample sample_rows(std::size_t n, std::size_t q, std::uint64_t rng_seed);

// Every row exactly once, scale 1.
RowSample full_sample(std::size_t n);

// Explicit index list; validated against n.
RowSample make_row_sample(std::size_t n, std::vector<std::size_t> indices,
                          std::uint64_t seed = 0);

void to_json(nlohmann::json& j, const RowSample& s);
void from_json(const nlohmann::json& j, RowSample& s);

// A = sqrt(N/q) * (rows Q of M): the q x N sampled measurement operator.
class PartialOperator {
 public:
  PartialOperator(ImplicitUnitary base, RowSample sample);

  const ImplicitUnitary& base() const { return base_; }
  const RowSample& sample() const { return sample_; }
  std::size_t ambient_dim() const { return base_.dim(); }
  std::size_t rows() const { return sample_.q(); }
  double scale() const { return sample_.scale(); }

  ComplexVector apply(const ComplexVector& x) const;          // A x
  ComplexVector apply_adjoint(const ComplexVector& y) const;  // A* y
  Complex entry(std::size_t row, std::size_t col) const;
  ComplexVector column(std::size_t col) const;                // one column of A

 private:
  ImplicitUnitary base_;
  RowSample sample_;
};

ComplexVector apply_partial(const PartialOperator& a, const ComplexVector& x);

// Mean of |(Mx)_j|^2 over the sample multiset Q (unscaled rows of M).
double sampled_mean(const PartialOperator& a, const ComplexVector& x);

// Mean of |(Mx)_j|^2 over all j in [N].
double full_mean(const ImplicitUnitary& m, const ComplexVector& x);

}  // namespace ripsample
