#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ripsample/sampling.hpp"

namespace ripsample {

enum class RipMode { Exhaustive, RandomSupports };

std::string to_string(RipMode mode);

// delta_k = max over k-column supports S of || A_S* A_S - I ||_2
// (Hermitian spectral norm), together with the support that attains it.
struct RipEstimate {
  std::size_t k = 0;
  double value = 0.0;
  RipMode mode = RipMode::Exhaustive;
  std::size_t supports_examined = 0;
  std::vector<std::size_t> witness;
  std::uint64_t seed = 0;
  double elapsed_seconds = 0.0;
};

void to_json(nlohmann::json& j, const RipEstimate& e);

struct RipOptions {
  // Exhaustive enumeration refuses to start above this support count.
  std::uint64_t enumeration_budget = 1'000'000;
  int threads = 1;
};

// Exact delta_k by colexicographic enumeration of all C(N, k) supports.
// Ties keep the first support in enumeration order.
RipEstimate rip_constant_exact(const PartialOperator& a, std::size_t k,
                               const RipOptions& options = {});

// Max of delta over `trials` uniformly random k-supports; a lower bound on
// delta_k. Trial t draws from the stream derived from (seed, t), so a larger
// trial count extends (never reshuffles) a smaller one.
RipEstimate rip_lower_bound(const PartialOperator& a, std::size_t k,
                            std::size_t trials, std::uint64_t seed,
                            const RipOptions& options = {});

// (1 - eps) ||x||^2 <= ||A x||^2 <= (1 + eps) ||x||^2 for this one vector.
bool check_rip_for_vector(const PartialOperator& a, const ComplexVector& x,
                          double eps);

// C(n, k), saturating at cap + 1 to keep budget checks overflow-safe.
std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap);

}  // namespace ripsample
