#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "ripsample/sampling.hpp"
#include "ripsample/unitary.hpp"

using namespace ripsample;

namespace {

ImplicitUnitary dense_from_oracle(const oracle::Mat& rows) {
  std::vector<ComplexVector> copy(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) copy[r] = rows[r];
  return ImplicitUnitary::dense(std::move(copy));
}

}  // namespace

TEST_CASE("unitary entries match the defining formulas") {
  for (std::size_t n : {1, 2, 3, 5, 8, 12, 16}) {
    const ImplicitUnitary m = ImplicitUnitary::dft(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        CHECK(std::abs(m.entry(r, c) - oracle::dft_entry(n, r, c)) < 1e-13);
      }
    }
    CHECK(m.flatness() == doctest::Approx(1.0 / std::sqrt(double(n))).epsilon(1e-12));
  }
  for (std::size_t n : {1, 2, 4, 8, 16}) {
    const ImplicitUnitary m = ImplicitUnitary::hadamard(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        CHECK(std::abs(m.entry(r, c) - oracle::hadamard_entry(n, r, c)) < 1e-13);
      }
    }
  }
}

TEST_CASE("fast apply agrees with the naive matvec") {
  std::mt19937_64 eng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // Power-of-two DFT takes the FFT path, other sizes direct summation; both
  // must match the oracle, as must Hadamard and explicit dense matrices.
  for (std::size_t n : {2, 3, 7, 8, 16, 20}) {
    const ImplicitUnitary m = ImplicitUnitary::dft(n);
    const oracle::Mat dense =
        oracle::dense_matrix(n, n, [&](std::size_t r, std::size_t c) {
          return oracle::dft_entry(n, r, c);
        });
    for (int rep = 0; rep < 5; ++rep) {
      ComplexVector x(n);
      for (auto& v : x) v = Complex(u(eng), u(eng));
      const ComplexVector got = m.apply(x);
      const oracle::Vec want = oracle::matvec(dense, x);
      const ComplexVector back = m.apply_adjoint(got);
      const oracle::Vec want_adj = oracle::matvec_adjoint(dense, got);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(got[j] - want[j]) < 1e-11);
        CHECK(std::abs(back[j] - want_adj[j]) < 1e-11);
        // M* M = I: the adjoint inverts the application.
        CHECK(std::abs(back[j] - x[j]) < 1e-11);
      }
    }
  }
  for (std::size_t n : {2, 8, 32}) {
    const ImplicitUnitary m = ImplicitUnitary::hadamard(n);
    const oracle::Mat dense =
        oracle::dense_matrix(n, n, [&](std::size_t r, std::size_t c) {
          return oracle::hadamard_entry(n, r, c);
        });
    ComplexVector x(n);
    for (auto& v : x) v = Complex(u(eng), u(eng));
    const ComplexVector got = m.apply(x);
    const oracle::Vec want = oracle::matvec(dense, x);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);
  }
  {
    const std::size_t n = 6;
    const oracle::Mat rows = oracle::random_unitary(n, 99);
    const ImplicitUnitary m = dense_from_oracle(rows);
    ComplexVector x(n);
    for (auto& v : x) v = Complex(u(eng), u(eng));
    const ComplexVector got = m.apply(x);
    const oracle::Vec want = oracle::matvec(rows, x);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);
  }
}

TEST_CASE("dense constructor rejects non-unitary rows") {
  std::vector<ComplexVector> rows(2, ComplexVector(2, Complex(0.0)));
  rows[0][0] = 1.0;
  rows[1][1] = 2.0;  // not unit norm
  CHECK_THROWS_AS(ImplicitUnitary::dense(std::move(rows)), std::invalid_argument);
}

TEST_CASE("dense text round-trip preserves entries") {
  const oracle::Mat rows = oracle::random_unitary(5, 4242);
  const ImplicitUnitary m = dense_from_oracle(rows);
  std::stringstream io;
  save_dense_unitary(io, m);
  const ImplicitUnitary back = load_dense_unitary(io);
  REQUIRE(back.dim() == m.dim());
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(std::abs(back.entry(r, c) - m.entry(r, c)) < 1e-12);
    }
  }
}

TEST_CASE("complex entry tokens parse and format") {
  CHECK(parse_complex_entry("0.5-0.25j") == Complex(0.5, -0.25));
  CHECK(parse_complex_entry("2") == Complex(2.0, 0.0));
  CHECK(parse_complex_entry("-1.5j") == Complex(0.0, -1.5));
  const Complex z(0.125, -3.0);
  CHECK(parse_complex_entry(format_complex_entry(z)) == z);
}

TEST_CASE("sample_rows draws with replacement, deterministically") {
  const RowSample s1 = sample_rows(16, 40, 77);
  const RowSample s2 = sample_rows(16, 40, 77);
  const RowSample s3 = sample_rows(16, 40, 78);
  CHECK(s1.indices == s2.indices);
  CHECK(s1.indices != s3.indices);
  CHECK(s1.ambient_dim == 16);
  CHECK(s1.q() == 40);  // q > N is legal: multiset with replacement
  for (std::size_t idx : s1.indices) CHECK(idx < 16);
  CHECK(s1.scale() == doctest::Approx(std::sqrt(16.0 / 40.0)));

  const RowSample full = full_sample(8);
  CHECK(full.q() == 8);
  CHECK(full.scale() == doctest::Approx(1.0));
  for (std::size_t j = 0; j < 8; ++j) CHECK(full.indices[j] == j);

  CHECK_THROWS_AS(make_row_sample(4, {0, 4}), std::invalid_argument);
  CHECK_THROWS_AS(sample_rows(0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_rows(4, 0, 1), std::invalid_argument);
}

TEST_CASE("row sample JSON round-trip") {
  const RowSample s = sample_rows(8, 5, 123);
  nlohmann::json j;
  to_json(j, s);
  RowSample back;
  from_json(j, back);
  CHECK(back.ambient_dim == s.ambient_dim);
  CHECK(back.indices == s.indices);
  CHECK(back.seed == s.seed);
}

TEST_CASE("partial operator matches its dense counterpart") {
  const std::size_t n = 12;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const RowSample s = sample_rows(n, 7, 5);
  const PartialOperator a(m, s);
  CHECK(a.rows() == 7);
  CHECK(a.ambient_dim() == n);

  const oracle::Mat dense = oracle::dense_partial(
      n, s.indices,
      [&](std::size_t r, std::size_t c) { return oracle::dft_entry(n, r, c); });

  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexVector x(n);
  for (auto& v : x) v = Complex(u(eng), u(eng));
  const ComplexVector ax = a.apply(x);
  const oracle::Vec want = oracle::matvec(dense, x);
  REQUIRE(ax.size() == 7);
  for (std::size_t r = 0; r < 7; ++r) CHECK(std::abs(ax[r] - want[r]) < 1e-12);

  ComplexVector y(7);
  for (auto& v : y) v = Complex(u(eng), u(eng));
  const ComplexVector aty = a.apply_adjoint(y);
  const oracle::Vec want_adj = oracle::matvec_adjoint(dense, y);
  for (std::size_t c = 0; c < n; ++c) CHECK(std::abs(aty[c] - want_adj[c]) < 1e-12);

  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      CHECK(std::abs(a.entry(r, c) - dense[r][c]) < 1e-13);
    }
  }
  const ComplexVector col = a.column(4);
  for (std::size_t r = 0; r < 7; ++r) CHECK(std::abs(col[r] - dense[r][4]) < 1e-13);
}

TEST_CASE("duplicate rows count with multiplicity in the averages") {
  const std::size_t n = 8;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const RowSample dup = make_row_sample(n, {2, 2, 5});
  const PartialOperator a(m, dup);

  ComplexVector x(n, Complex(0.0));
  x[1] = Complex(0.7, -0.2);
  x[6] = Complex(-0.1, 0.4);
  const ComplexVector mx = m.apply(x);
  const double want =
      (2.0 * std::norm(mx[2]) + std::norm(mx[5])) / 3.0;
  CHECK(sampled_mean(a, x) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("full-sample averages equal population averages exactly") {
  const std::size_t n = 16;
  const ImplicitUnitary m = ImplicitUnitary::hadamard(n);
  const PartialOperator a(m, full_sample(n));
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    ComplexVector x(n);
    for (auto& v : x) v = Complex(u(eng), u(eng));
    // Same multiset of terms in the same order: bitwise equality.
    CHECK(sampled_mean(a, x) == full_mean(m, x));
    // Parseval: population mean of |(Mx)_j|^2 is ||x||^2 / N.
    CHECK(full_mean(m, x) ==
          doctest::Approx(norm2_squared(x) / double(n)).epsilon(1e-12));
  }
}

TEST_CASE("unit basis vectors have flat transforms across all coordinates") {
  // |(M e_l)_j| = 1/sqrt(N) for every j and l, so the sampled and full means
  // are identical across l for any fixed row sample.
  const std::size_t n = 16;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const RowSample s = sample_rows(n, 6, 31);
  const PartialOperator a(m, s);
  std::vector<double> smp(n), pop(n);
  for (std::size_t l = 0; l < n; ++l) {
    ComplexVector e(n, Complex(0.0));
    e[l] = 1.0;
    smp[l] = sampled_mean(a, e);
    pop[l] = full_mean(m, e);
  }
  for (std::size_t l = 0; l < n; ++l) {
    CHECK(smp[l] == doctest::Approx(smp[0]).epsilon(1e-12));
    CHECK(pop[l] == doctest::Approx(1.0 / double(n)).epsilon(1e-12));
  }
}
