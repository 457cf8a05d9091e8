#include "ripsample/sampling.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "ripsample/rng.hpp"

namespace ripsample {

double RowSample::scale() const {
  return std::sqrt(static_cast<double>(ambient_dim) / static_cast<double>(q()));
}

RowSample sample_rows(std::size_t n, std::size_t q, std::uint64_t rng_seed) {
  if (n < 1) throw std::invalid_argument("sample_rows: N must be >= 1");
  if (q < 1) throw std::invalid_argument("sample_rows: q must be >= 1");
  RowSample s;
  s.ambient_dim = n;
  s.seed = rng_seed;
  s.indices.resize(q);
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < q; ++i) {
    s.indices[i] = static_cast<std::size_t>(rng.uniform_index(n));
  }
  return s;
}

RowSample full_sample(std::size_t n) {
  if (n < 1) throw std::invalid_argument("full_sample: N must be >= 1");
  RowSample s;
  s.ambient_dim = n;
  s.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.indices[i] = i;
  return s;
}

RowSample make_row_sample(std::size_t n, std::vector<std::size_t> indices,
                          std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_row_sample: N must be >= 1");
  if (indices.empty()) throw std::invalid_argument("make_row_sample: q must be >= 1");
  for (std::size_t idx : indices) {
    if (idx >= n) throw std::invalid_argument("make_row_sample: index out of range");
  }
  RowSample s;
  s.ambient_dim = n;
  s.indices = std::move(indices);
  s.seed = seed;
  return s;
}

void to_json(nlohmann::json& j, const RowSample& s) {
  j = nlohmann::json{{"N", s.ambient_dim},
                     {"q", s.q()},
                     {"indices", s.indices},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, RowSample& s) {
  const std::size_t n = j.at("N").get<std::size_t>();
  auto indices = j.at("indices").get<std::vector<std::size_t>>();
  if (j.contains("q") && j.at("q").get<std::size_t>() != indices.size()) {
    throw std::invalid_argument("RowSample: q does not match indices length");
  }
  s = make_row_sample(n, std::move(indices),
                      j.value("seed", static_cast<std::uint64_t>(0)));
}

PartialOperator::PartialOperator(ImplicitUnitary base, RowSample sample)
    : base_(std::move(base)), sample_(std::move(sample)) {
  if (sample_.ambient_dim != base_.dim()) {
    throw std::invalid_argument("PartialOperator: sample dimension mismatch");
  }
  for (std::size_t idx : sample_.indices) {
    if (idx >= base_.dim()) {
      throw std::invalid_argument("PartialOperator: row index out of range");
    }
  }
}

ComplexVector PartialOperator::apply(const ComplexVector& x) const {
  const ComplexVector mx = base_.apply(x);
  const double s = scale();
  ComplexVector out(rows());
  for (std::size_t m = 0; m < out.size(); ++m) {
    out[m] = s * mx[sample_.indices[m]];
  }
  return out;
}

ComplexVector PartialOperator::apply_adjoint(const ComplexVector& y) const {
  require_vector(y, rows(), "apply_adjoint");
  const double s = scale();
  ComplexVector scattered(ambient_dim(), Complex(0.0));
  for (std::size_t m = 0; m < y.size(); ++m) {
    scattered[sample_.indices[m]] += s * y[m];
  }
  return base_.apply_adjoint(scattered);
}

Complex PartialOperator::entry(std::size_t row, std::size_t col) const {
  if (row >= rows()) throw std::out_of_range("PartialOperator::entry: row out of range");
  return scale() * base_.entry(sample_.indices[row], col);
}

ComplexVector PartialOperator::column(std::size_t col) const {
  const double s = scale();
  ComplexVector out(rows());
  for (std::size_t m = 0; m < out.size(); ++m) {
    out[m] = s * base_.entry(sample_.indices[m], col);
  }
  return out;
}

ComplexVector apply_partial(const PartialOperator& a, const ComplexVector& x) {
  return a.apply(x);
}

double sampled_mean(const PartialOperator& a, const ComplexVector& x) {
  const ComplexVector mx = a.base().apply(x);
  double acc = 0.0;
  for (std::size_t idx : a.sample().indices) acc += std::norm(mx[idx]);
  return acc / static_cast<double>(a.rows());
}

double full_mean(const ImplicitUnitary& m, const ComplexVector& x) {
  const ComplexVector mx = m.apply(x);
  double acc = 0.0;
  for (const Complex& v : mx) acc += std::norm(v);
  return acc / static_cast<double>(m.dim());
}

}  // namespace ripsample
