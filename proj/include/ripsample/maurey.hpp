#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ripsample/linalg.hpp"
#include "ripsample/rng.hpp"
#include "ripsample/sampling.hpp"
#include "ripsample/unitary.hpp"

namespace ripsample {

// Distribution over pairs (l, s), l in [N], s in {0,1,2,3}, encoding a unit
// l1-mass vector x through
//   sum_s p_{l,s} = |x_l|   and   sqrt(2) * sum_s i^s * p_{l,s} = x_l,
// where i^s walks {1, i, -1, -i}. Direct construction only checks that the
// weights form a probability distribution; the x-relative identities are the
// postcondition of phase_decompose.
struct PhaseDistribution {
  std::vector<std::array<double, 4>> weights;

  std::size_t dim() const { return weights.size(); }
  double total_mass() const;
  void validate() const;  // nonnegative, finite, total mass 1 (1e-10)
};

// Requires ||x||_1 = 1 within 1e-10. Per coordinate x_l = a + b i:
//   p_{l,0} = max(a,0)/sqrt(2) + c,  p_{l,2} = max(-a,0)/sqrt(2) + c,
//   p_{l,1} = max(b,0)/sqrt(2),      p_{l,3} = max(-b,0)/sqrt(2),
// with slack c = (|x_l| - (|a|+|b|)/sqrt(2)) / 2 keeping the mass exact.
PhaseDistribution phase_decompose(const ComplexVector& x);

enum class NetVariant {
  Capped,      // one vector per level, values clipped at 9 * 2^-i
  Telescoped,  // per-level difference chains with clipped jumps
};

std::string to_string(NetVariant v);

// Scale parameters shared by the sampling-net pipeline. Logs are base 2 and
// rounded up. gamma is the tolerated fraction of out-of-band coordinates:
// eta/(2t) for the capped variant, eta/(60(t+r)) for the telescoped one
// (which additionally requires eps >= eta). The verification slacks are the
// calibrated defaults and may be overridden before calling the verifier.
struct NetParams {
  NetVariant variant = NetVariant::Capped;
  double eps = 0.0;
  double eta = 0.0;
  int t = 0;  // ceil(log2(1/eta))
  int r = 0;  // ceil(log2(1/eps^2))
  double gamma = 0.0;
  double sample_constant = 8.0;  // c_F in |F| = ceil(c_F * 2^i * log2(1/gamma))

  double mult_slack = 0.0;   // capped: 3 eps;  telescoped: 10 eps
  double add_slack = 0.0;    // capped: 9 eta + 2 t gamma; telescoped: 9 eta + 60 (t+r) gamma

  static NetParams capped(double eps, double eta, double sample_constant = 8.0);
  static NetParams telescoped(double eps, double eta, double sample_constant = 8.0);

  // Number of (l, s) draws used to form a level-i sample vector.
  std::size_t sample_count(int level) const;
  int max_level() const { return t + r; }
};

// g = (sqrt(2)/|F|) * sum_{(l,s) in F} i^s M^(l) over |F| independent draws
// from d. E[g] = M x at the matrix's own scale; ||g||_inf <= sqrt(2) ||M||_inf.
ComplexVector sample_g(const ImplicitUnitary& m, const PhaseDistribution& d,
                       int level, const NetParams& params, Rng& rng);

// Count of coordinates j (multiset-counted for row samples) where
// | |mx_j| - |g_j| | > band, both magnitudes divided by the flatness scale.
std::size_t count_band_violations(const ComplexVector& mx, const ComplexVector& g,
                                  double band, double flatness);

struct GoodGResult {
  ComplexVector g;  // matrix-scale; divide by flatness for the net builders
  int attempts = 0;
  bool ok = false;
  // Violation fractions of the returned draw, over [N] and over Q.
  double violation_fraction_ambient = 0.0;
  double violation_fraction_sample = 0.0;
};

// Redraws sample_g until at most a gamma fraction of [N] and of Q violates
// the band |(Mx)_j| ~ |g_j| +- 2^(-level/2) on the flatness-normalized scale.
// Failure after max_attempts is reported through `ok`, never absorbed.
GoodGResult find_good_g(const ImplicitUnitary& m, const ComplexVector& x,
                        const RowSample& q, int level, const NetParams& params,
                        Rng& rng, int max_attempts = 64);

// Net family over flatness-normalized level vectors. For the capped variant,
// g_levels[i-1] holds g^(i+r) for i = 1..t; level sets B_i pick, per
// coordinate, the smallest i with |g^(i+r)_j| >= 2 * 2^(-i/2), and
//   h^(i)_j = min(|g^(i+r)_j|^2 * [j in B_i], 9 * 2^-i).
// For the telescoped variant, g_levels[m-1] holds g^(m) for m = 1..t+r;
// level sets C_i use the same smallest-index rule on |g^(i)_j|, and for
// m = i..i+r:
//   h^(i,m)_j = |g^(m)_j|^2 * [j in C_i],
//   delta^(i,m)_j = h^(i,m)_j - h^(i,m-1)_j, zeroed when the jump exceeds
//                   30 * 2^(-(i+m)/2), with h^(i,i-1) = 0.
struct NetFamily {
  NetVariant variant = NetVariant::Capped;
  NetParams params;
  std::vector<ComplexVector> g_levels;
  std::vector<std::vector<std::size_t>> level_sets;  // B_i or C_i, i = 1..t

  // Capped: h[i-1][j] = h^(i)_j.
  std::vector<std::vector<double>> h;

  // Telescoped: h_chain[i-1][m-i][j] = h^(i,m)_j and likewise delta_chain,
  // m = i..i+r. Values for m outside [i, i+r] are identically zero and are
  // not stored.
  std::vector<std::vector<std::vector<double>>> h_chain;
  std::vector<std::vector<std::vector<double>>> delta_chain;

  // Net contribution at coordinate j: sum_i h^(i)_j, or the telescoped
  // double sum sum_i sum_m delta^(i,m)_j.
  double net_value(std::size_t j) const;
};

NetFamily build_capped_family(std::vector<ComplexVector> g_levels,
                              const NetParams& params);
NetFamily build_telescoped_family(std::vector<ComplexVector> g_levels,
                                  const NetParams& params);

void to_json(nlohmann::json& j, const NetFamily& f);

enum class CheckKind { TwoSided, LowerBound };

struct CheckItem {
  std::string name;
  CheckKind kind = CheckKind::TwoSided;
  double lhs = 0.0;
  double rhs = 0.0;
  double eps_slack = 0.0;
  double alpha_slack = 0.0;
  double abs_gap = 0.0;                 // |lhs - rhs| (TwoSided), rhs - lhs (LowerBound)
  std::optional<double> rel_gap;        // abs_gap / rhs when rhs > 0
  bool pass = false;
};

struct DecompositionReport {
  NetVariant variant = NetVariant::Capped;
  std::size_t ambient_dim = 0;
  std::size_t sample_size = 0;
  std::vector<CheckItem> items;
  bool all_pass = false;
};

void to_json(nlohmann::json& j, const CheckItem& item);
void to_json(nlohmann::json& j, const DecompositionReport& r);

// Compares sample and population averages of |(Mx)_j|^2 against the family's
// net sums, all on the flatness-normalized scale, against the slack constants
// carried by family.params. The telescoped variant additionally checks the
// population energy against the level-set mass sum_i 2^-i |C_i| / N - eta.
DecompositionReport verify_decomposition(const ImplicitUnitary& m,
                                         const ComplexVector& x,
                                         const RowSample& q,
                                         const NetFamily& family);

// Bounded scalar test distributions for concentration probes.
enum class BoundedKind { Constant, Bernoulli, UniformReal, Rademacher, UnitPhase };

std::string to_string(BoundedKind kind);

struct BoundedDistribution {
  BoundedKind kind = BoundedKind::Constant;
  double a = 1.0;    // Constant value / Bernoulli high value / magnitude bound
  double p = 0.5;    // Bernoulli success probability
  double lo = -1.0;  // UniformReal support
  double hi = 1.0;

  void validate() const;  // finite parameters, p in [0,1], lo <= hi
  bool complex_valued() const { return kind == BoundedKind::UnitPhase; }
  double bound() const;
  Complex mean() const;
  double abs_mean() const;  // E|X|
  Complex draw(Rng& rng) const;
};

// Fraction of `trials` where the mean of n_vars draws leaves the band:
// real kinds test approx_within(mean, E X, spec); the complex kind tests
// approx_within(|mean|, |E X|, spec).
double tail_probe(const BoundedDistribution& dist, std::size_t n_vars,
                  const ApproxSpec& spec, std::size_t trials, Rng& rng);

}  // namespace ripsample
