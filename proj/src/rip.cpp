#include "ripsample/rip.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

#include "ripsample/rng.hpp"

namespace ripsample {

namespace {

Eigen::MatrixXcd dense_operator(const PartialOperator& a) {
  const std::size_t q = a.rows();
  const std::size_t n = a.ambient_dim();
  Eigen::MatrixXcd out(q, n);
  for (std::size_t c = 0; c < n; ++c) {
    const ComplexVector col = a.column(c);
    for (std::size_t r = 0; r < q; ++r) out(r, c) = col[r];
  }
  return out;
}

// || G[S, S] - I ||_2 for the precomputed full Gram G = A* A.
double support_deviation(const Eigen::MatrixXcd& gram,
                         const std::vector<std::size_t>& support,
                         Eigen::MatrixXcd& scratch) {
  const std::size_t k = support.size();
  scratch.resize(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      scratch(i, j) = gram(support[i], support[j]);
    }
    scratch(i, i) -= 1.0;
  }
  if (k == 1) return std::abs(scratch(0, 0).real());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(scratch,
                                                     Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

// Same deviation, computed from the dense operator without forming the full
// N x N Gram: gathers the q x k submatrix and takes its k x k Gram. Cheaper
// than the full Gram when trials * k^2 stays below N^2.
double support_deviation_cols(const Eigen::MatrixXcd& dense,
                              const std::vector<std::size_t>& support,
                              Eigen::MatrixXcd& block,
                              Eigen::MatrixXcd& scratch) {
  const std::size_t k = support.size();
  block.resize(dense.rows(), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    block.col(static_cast<Eigen::Index>(i)) =
        dense.col(static_cast<Eigen::Index>(support[i]));
  }
  scratch = block.adjoint() * block;
  for (std::size_t i = 0; i < k; ++i) scratch(i, i) -= 1.0;
  if (k == 1) return std::abs(scratch(0, 0).real());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(scratch,
                                                     Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

// Colexicographic successor of a sorted support within [0, n). Returns false
// after the last support.
bool next_support_colex(std::vector<std::size_t>& s, std::size_t n) {
  const std::size_t k = s.size();
  for (std::size_t p = 0; p < k; ++p) {
    const std::size_t limit = (p + 1 < k) ? s[p + 1] : n;
    if (s[p] + 1 < limit) {
      ++s[p];
      for (std::size_t i = 0; i < p; ++i) s[i] = i;
      return true;
    }
  }
  return false;
}

// Support with the given colexicographic rank (rank = sum_i C(s_i, i+1)).
std::vector<std::size_t> support_at_colex_rank(std::uint64_t rank, std::size_t n,
                                               std::size_t k) {
  std::vector<std::size_t> s(k);
  for (std::size_t pos = k; pos-- > 0;) {
    std::size_t m = pos;  // smallest candidate for element index pos
    while (binomial_capped(m + 1, pos + 1, UINT64_MAX - 1) <= rank) ++m;
    s[pos] = m;
    rank -= binomial_capped(m, pos + 1, UINT64_MAX - 1);
  }
  return s;
}

}  // namespace

std::string to_string(RipMode mode) {
  return mode == RipMode::Exhaustive ? "exhaustive" : "random-supports";
}

void to_json(nlohmann::json& j, const RipEstimate& e) {
  j = nlohmann::json{{"k", e.k},
                     {"delta", e.value},
                     {"mode", to_string(e.mode)},
                     {"supports_examined", e.supports_examined},
                     {"witness", e.witness},
                     {"seed", e.seed},
                     {"elapsed_seconds", e.elapsed_seconds}};
}

std::uint64_t binomial_capped(std::size_t n, std::size_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // result * (n - k + i) is divisible by i at every step.
    result = result * (n - k + i) / i;
    if (result > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(result);
}

RipEstimate rip_constant_exact(const PartialOperator& a, std::size_t k,
                               const RipOptions& options) {
  const std::size_t n = a.ambient_dim();
  if (k < 1 || k > n) throw std::invalid_argument("rip_constant_exact: need 1 <= k <= N");
  const std::uint64_t total = binomial_capped(n, k, options.enumeration_budget);
  if (total > options.enumeration_budget) {
    throw std::domain_error(
        "rip_constant_exact: C(N, k) exceeds the enumeration budget of " +
        std::to_string(options.enumeration_budget) +
        "; use rip_lower_bound or raise the budget");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXcd dense = dense_operator(a);
  const Eigen::MatrixXcd gram = dense.adjoint() * dense;

  const int threads = std::max(1, options.threads);
  struct Best {
    double value = -1.0;
    std::uint64_t ordinal = 0;
    std::vector<std::size_t> witness;
  };
  const std::uint64_t nchunks = std::min<std::uint64_t>(threads, total);
  std::vector<Best> best(nchunks);

  auto scan = [&](std::uint64_t chunk) {
    const std::uint64_t lo = total * chunk / nchunks;
    const std::uint64_t hi = total * (chunk + 1) / nchunks;
    if (lo >= hi) return;
    std::vector<std::size_t> support = support_at_colex_rank(lo, n, k);
    Eigen::MatrixXcd scratch;
    Best b;
    for (std::uint64_t ord = lo; ord < hi; ++ord) {
      const double d = support_deviation(gram, support, scratch);
      if (d > b.value) {
        b.value = d;
        b.ordinal = ord;
        b.witness = support;
      }
      if (ord + 1 < hi) next_support_colex(support, n);
    }
    best[chunk] = std::move(b);
  };

  if (nchunks == 1) {
    scan(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nchunks);
    for (std::uint64_t c = 0; c < nchunks; ++c) pool.emplace_back(scan, c);
    for (auto& t : pool) t.join();
  }

  Best overall;
  for (const Best& b : best) {
    if (b.value > overall.value ||
        (b.value == overall.value && !b.witness.empty() &&
         (overall.witness.empty() || b.ordinal < overall.ordinal))) {
      overall = b;
    }
  }

  RipEstimate e;
  e.k = k;
  e.value = overall.value;
  e.mode = RipMode::Exhaustive;
  e.supports_examined = total;
  e.witness = std::move(overall.witness);
  e.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

RipEstimate rip_lower_bound(const PartialOperator& a, std::size_t k,
                            std::size_t trials, std::uint64_t seed,
                            const RipOptions& options) {
  const std::size_t n = a.ambient_dim();
  if (k < 1 || k > n) throw std::invalid_argument("rip_lower_bound: need 1 <= k <= N");
  if (trials < 1) throw std::invalid_argument("rip_lower_bound: trials must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXcd dense = dense_operator(a);
  const bool full_gram = trials * k * k > 2 * n * n;
  Eigen::MatrixXcd gram;
  if (full_gram) gram = dense.adjoint() * dense;

  const Rng master(seed);
  RipEstimate e;
  e.k = k;
  e.mode = RipMode::RandomSupports;
  e.seed = seed;
  e.supports_examined = trials;
  e.value = -1.0;

  std::vector<std::size_t> pool(n);
  Eigen::MatrixXcd block;
  Eigen::MatrixXcd scratch;
  std::vector<std::size_t> support(k);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = master.derive(t);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
      std::swap(pool[i], pool[j]);
      support[i] = pool[i];
    }
    std::sort(support.begin(), support.end());
    const double d = full_gram
                         ? support_deviation(gram, support, scratch)
                         : support_deviation_cols(dense, support, block, scratch);
    if (d > e.value) {
      e.value = d;
      e.witness = support;
    }
  }
  e.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

bool check_rip_for_vector(const PartialOperator& a, const ComplexVector& x,
                          double eps) {
  const double ref = norm2_squared(x);
  const double val = norm2_squared(a.apply(x));
  return (1.0 - eps) * ref <= val && val <= (1.0 + eps) * ref;
}

}  // namespace ripsample
