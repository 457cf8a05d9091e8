#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "ripsample/linalg.hpp"
#include "ripsample/sampling.hpp"

namespace ripsample {

struct RecoveryResult {
  ComplexVector estimate;
  std::size_t iterations = 0;        // IHT: iterations run; OMP: atoms selected
  double residual_norm = 0.0;        // ||y - A estimate||_2
  std::vector<std::size_t> support;  // nonzero coordinates, ascending
  bool converged = false;            // residual <= tol * ||y||_2
  bool degenerate = false;           // OMP hit a rank-deficient or stalled step
};

void to_json(nlohmann::json& j, const RecoveryResult& r);

// Iterative hard thresholding with unit step size:
//   x <- H_k(x + A^*(y - A x)),  x_0 = 0,
// where H_k keeps the k largest-magnitude entries (ties resolved toward the
// lowest index). Stops once the relative residual drops to tol or after
// max_iters iterations.
RecoveryResult iht(const PartialOperator& a, const ComplexVector& y,
                   std::size_t k, std::size_t max_iters = 200,
                   double tol = 1e-12);

// Orthogonal matching pursuit: repeatedly selects the column most correlated
// with the residual (ties toward the lowest index) and re-solves the least
// squares problem on the selected support, up to k atoms. A rank-deficient
// least squares step, a re-selected column, or a residual increase sets
// `degenerate` and stops with the last sound estimate.
RecoveryResult omp(const PartialOperator& a, const ComplexVector& y,
                   std::size_t k, double tol = 1e-12);

}  // namespace ripsample
