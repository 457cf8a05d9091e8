#include "ripsample/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace ripsample {

namespace {

// Keep the k largest-magnitude entries of x, zeroing the rest. Ties keep the
// lower index.
void hard_threshold(ComplexVector& x, std::size_t k) {
  if (k >= x.size()) return;
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + k, order.end(),
                   [&x](std::size_t a, std::size_t b) {
                     const double na = std::norm(x[a]);
                     const double nb = std::norm(x[b]);
                     if (na != nb) return na > nb;
                     return a < b;
                   });
  std::vector<bool> keep(x.size(), false);
  for (std::size_t i = 0; i < k; ++i) keep[order[i]] = true;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!keep[j]) x[j] = Complex(0.0);
  }
}

std::vector<std::size_t> nonzero_support(const ComplexVector& x) {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != Complex(0.0)) s.push_back(j);
  }
  return s;
}

double residual_norm_for(const PartialOperator& a, const ComplexVector& x,
                         const ComplexVector& y) {
  ComplexVector ax = a.apply(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::norm(y[i] - ax[i]);
  return std::sqrt(acc);
}

}  // namespace

void to_json(nlohmann::json& j, const RecoveryResult& r) {
  nlohmann::json est = nlohmann::json::array();
  for (const Complex& z : r.estimate) est.push_back({z.real(), z.imag()});
  j = nlohmann::json{{"estimate", std::move(est)},
                     {"iterations", r.iterations},
                     {"residual_norm", r.residual_norm},
                     {"support", r.support},
                     {"converged", r.converged},
                     {"degenerate", r.degenerate}};
}

RecoveryResult iht(const PartialOperator& a, const ComplexVector& y,
                   std::size_t k, std::size_t max_iters, double tol) {
  const std::size_t n = a.ambient_dim();
  require_vector(y, a.rows(), "iht measurement");
  if (k == 0 || k > n) throw std::invalid_argument("iht: need 1 <= k <= N");

  const double y_norm = norm2(y);
  const double stop = tol * std::max(y_norm, 1e-300);

  RecoveryResult result;
  result.estimate.assign(n, Complex(0.0));
  result.residual_norm = y_norm;

  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    ComplexVector ax = a.apply(result.estimate);
    ComplexVector residual(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - ax[i];
    ComplexVector grad = a.apply_adjoint(residual);
    for (std::size_t j = 0; j < n; ++j) result.estimate[j] += grad[j];
    hard_threshold(result.estimate, k);
    result.iterations = iter;
    result.residual_norm = residual_norm_for(a, result.estimate, y);
    if (result.residual_norm <= stop) {
      result.converged = true;
      break;
    }
  }
  result.support = nonzero_support(result.estimate);
  return result;
}

RecoveryResult omp(const PartialOperator& a, const ComplexVector& y,
                   std::size_t k, double tol) {
  const std::size_t n = a.ambient_dim();
  const std::size_t q = a.rows();
  require_vector(y, q, "omp measurement");
  if (k == 0 || k > n) throw std::invalid_argument("omp: need 1 <= k <= N");

  const double y_norm = norm2(y);
  const double stop = tol * std::max(y_norm, 1e-300);

  RecoveryResult result;
  result.estimate.assign(n, Complex(0.0));
  result.residual_norm = y_norm;

  Eigen::VectorXcd rhs(q);
  for (std::size_t i = 0; i < q; ++i) rhs(static_cast<Eigen::Index>(i)) = y[i];
  Eigen::VectorXcd residual = rhs;

  std::vector<std::size_t> selected;
  std::vector<bool> in_support(n, false);
  Eigen::MatrixXcd cols(q, 0);
  Eigen::VectorXcd coeffs;
  double prev_residual = y_norm;

  while (selected.size() < std::min(k, q) && result.residual_norm > stop) {
    ComplexVector rvec(q);
    for (std::size_t i = 0; i < q; ++i) rvec[i] = residual(static_cast<Eigen::Index>(i));
    ComplexVector corr = a.apply_adjoint(rvec);

    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double mag = std::norm(corr[j]);
      if (mag > best_mag) {
        best_mag = mag;
        best = j;
      }
    }
    if (in_support[best] || best_mag <= 0.0) {
      result.degenerate = true;
      break;
    }

    Eigen::MatrixXcd grown(q, cols.cols() + 1);
    grown.leftCols(cols.cols()) = cols;
    const ComplexVector col = a.column(best);
    for (std::size_t i = 0; i < q; ++i) {
      grown(static_cast<Eigen::Index>(i), cols.cols()) = col[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(grown);
    if (qr.rank() < grown.cols()) {
      result.degenerate = true;
      break;
    }
    Eigen::VectorXcd z = qr.solve(rhs);
    Eigen::VectorXcd new_residual = rhs - grown * z;
    const double new_norm = new_residual.norm();
    if (new_norm > prev_residual * (1.0 + 1e-12)) {
      result.degenerate = true;
      break;
    }

    cols.swap(grown);
    coeffs = std::move(z);
    residual = std::move(new_residual);
    selected.push_back(best);
    in_support[best] = true;
    prev_residual = new_norm;
    result.residual_norm = new_norm;
    result.iterations = selected.size();
  }

  for (std::size_t i = 0; i < selected.size(); ++i) {
    result.estimate[selected[i]] = coeffs(static_cast<Eigen::Index>(i));
  }
  result.support = selected;
  std::sort(result.support.begin(), result.support.end());
  result.converged = result.residual_norm <= stop;
  return result;
}

}  // namespace ripsample
