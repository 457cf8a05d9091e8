#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "ripsample/recovery.hpp"
#include "ripsample/rng.hpp"
#include "ripsample/sampling.hpp"
#include "ripsample/unitary.hpp"

using namespace ripsample;

namespace {

ComplexVector sparse_signal(std::size_t n, const std::vector<std::size_t>& support,
                            const std::vector<Complex>& values) {
  ComplexVector x(n, Complex(0.0));
  for (std::size_t i = 0; i < support.size(); ++i) x[support[i]] = values[i];
  return x;
}

double relative_error(const ComplexVector& est, const ComplexVector& truth) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    num += std::norm(est[j] - truth[j]);
    den += std::norm(truth[j]);
  }
  return std::sqrt(num / den);
}

ImplicitUnitary identity_unitary(std::size_t n) {
  std::vector<ComplexVector> rows(n, ComplexVector(n, Complex(0.0)));
  for (std::size_t j = 0; j < n; ++j) rows[j][j] = 1.0;
  return ImplicitUnitary::dense(std::move(rows));
}

}  // namespace

TEST_CASE("full-sample measurements recover exactly in one step") {
  // With q = N the operator is unitary, so the first gradient step lands on
  // x and both solvers finish immediately.
  const std::size_t n = 16;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const PartialOperator a(m, full_sample(n));
  const ComplexVector x =
      sparse_signal(n, {2, 9, 13}, {{1.0, -0.5}, {0.0, 2.0}, {-0.75, 0.0}});
  const ComplexVector y = a.apply(x);

  const RecoveryResult ihtres = iht(a, y, 3);
  CHECK(ihtres.converged);
  CHECK(ihtres.iterations == 1);
  CHECK(relative_error(ihtres.estimate, x) < 1e-12);
  CHECK(ihtres.support == std::vector<std::size_t>{2, 9, 13});
  CHECK(ihtres.residual_norm < 1e-12);

  const RecoveryResult ompres = omp(a, y, 3);
  CHECK(ompres.converged);
  CHECK_FALSE(ompres.degenerate);
  CHECK(ompres.iterations == 3);  // one new atom per step
  CHECK(relative_error(ompres.estimate, x) < 1e-12);
  CHECK(ompres.support == std::vector<std::size_t>{2, 9, 13});
}

TEST_CASE("subsampled DFT recovers sparse signals at a frozen seed") {
  const std::size_t n = 64;
  const std::size_t k = 3;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const PartialOperator a(m, sample_rows(n, 32, 7101));
  Rng rng(88);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> support;
    while (support.size() < k) {
      const std::size_t j = rng.uniform_index(n);
      if (std::find(support.begin(), support.end(), j) == support.end()) {
        support.push_back(j);
      }
    }
    std::sort(support.begin(), support.end());
    std::vector<Complex> values;
    for (std::size_t i = 0; i < k; ++i) {
      values.push_back((rng.next_u64() & 1) ? Complex(1.0, 0.0) : Complex(-1.0, 0.0));
    }
    const ComplexVector x = sparse_signal(n, support, values);
    const ComplexVector y = a.apply(x);

    const RecoveryResult ihtres = iht(a, y, k);
    CHECK(ihtres.converged);
    CHECK(relative_error(ihtres.estimate, x) < 1e-6);
    CHECK(ihtres.support == support);

    const RecoveryResult ompres = omp(a, y, k);
    CHECK(ompres.converged);
    CHECK(relative_error(ompres.estimate, x) < 1e-6);
    CHECK(ompres.support == support);
  }
}

TEST_CASE("hard thresholding breaks magnitude ties toward the lowest index") {
  const std::size_t n = 6;
  const ImplicitUnitary m = identity_unitary(n);
  const PartialOperator a(m, full_sample(n));
  // y has two equal-magnitude coordinates; H_1 must keep index 1, not 4.
  ComplexVector y(n, Complex(0.0));
  y[1] = Complex(0.5, 0.0);
  y[4] = Complex(0.0, 0.5);
  const RecoveryResult res = iht(a, y, 1, 3);
  REQUIRE(res.support.size() == 1);
  CHECK(res.support[0] == 1);
  CHECK(res.iterations <= 3);
  // The unreachable half of y stays as residual.
  CHECK(res.residual_norm == doctest::Approx(0.5));
  CHECK_FALSE(res.converged);
}

TEST_CASE("iht reports iteration counts and respects max_iters") {
  const std::size_t n = 16;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const PartialOperator a(m, sample_rows(n, 6, 3111));
  Rng rng(12);
  ComplexVector x(n, Complex(0.0));
  x[3] = Complex(1.0, 0.0);
  x[8] = Complex(-2.0, 1.0);
  const ComplexVector y = a.apply(x);
  const RecoveryResult capped = iht(a, y, 2, 4);
  CHECK(capped.iterations <= 4);
  const RecoveryResult loose = iht(a, y, 2, 200);
  // The reported residual matches a recomputation from the estimate.
  ComplexVector ax = a.apply(loose.estimate);
  double rec = 0.0;
  for (std::size_t r = 0; r < ax.size(); ++r) rec += std::norm(y[r] - ax[r]);
  CHECK(loose.residual_norm == doctest::Approx(std::sqrt(rec)).epsilon(1e-10));
}

TEST_CASE("omp residuals are nonincreasing in the atom budget") {
  const std::size_t n = 32;
  const ImplicitUnitary m = ImplicitUnitary::hadamard(n);
  const PartialOperator a(m, sample_rows(n, 12, 515));
  Rng rng(900);
  ComplexVector x(n, Complex(0.0));
  x[1] = Complex(2.0, 0.0);
  x[7] = Complex(-1.0, 0.5);
  x[20] = Complex(0.25, 0.25);
  const ComplexVector y = a.apply(x);
  double prev = norm2(y);
  for (std::size_t k = 1; k <= 5; ++k) {
    const RecoveryResult res = omp(a, y, k);
    CHECK(res.residual_norm <= prev + 1e-12);
    prev = res.residual_norm;
    CHECK(std::is_sorted(res.support.begin(), res.support.end()));
    CHECK(res.support.size() <= k);
    // Estimate is supported where claimed.
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::binary_search(res.support.begin(), res.support.end(), j)) {
        CHECK(res.estimate[j] == Complex(0.0, 0.0));
      }
    }
  }
}

TEST_CASE("omp flags degenerate steps instead of diverging") {
  // One measurement row cannot support two atoms: the second least-squares
  // step is rank-deficient or re-selects, so the solver stops flagged.
  const std::size_t n = 8;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const PartialOperator a(m, make_row_sample(n, {3}));
  ComplexVector x(n, Complex(0.0));
  x[2] = Complex(1.0, 0.0);
  x[5] = Complex(0.5, 0.5);
  const ComplexVector y = a.apply(x);
  const RecoveryResult res = omp(a, y, 3);
  CHECK((res.degenerate || res.converged));
  CHECK(res.support.size() <= 3);
  CHECK(all_finite(res.estimate));
}

TEST_CASE("solvers validate dimensions and sparsity") {
  const std::size_t n = 8;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const PartialOperator a(m, sample_rows(n, 4, 1));
  const ComplexVector y(4, Complex(1.0));
  CHECK_THROWS_AS(iht(a, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(iht(a, y, n + 1), std::invalid_argument);
  CHECK_THROWS_AS(iht(a, ComplexVector(3), 2), std::invalid_argument);
  CHECK_THROWS_AS(omp(a, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(omp(a, ComplexVector(5), 2), std::invalid_argument);
}

TEST_CASE("recovery results serialize to JSON") {
  const std::size_t n = 8;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  const PartialOperator a(m, full_sample(n));
  ComplexVector x(n, Complex(0.0));
  x[4] = Complex(1.0, 1.0);
  const ComplexVector y = a.apply(x);
  const RecoveryResult res = iht(a, y, 1);
  nlohmann::json j;
  to_json(j, res);
  CHECK(j["converged"].get<bool>());
  CHECK(j["support"].size() == 1);
  CHECK(j["iterations"].get<std::size_t>() == res.iterations);
}
