#include "ripsample/maurey.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ripsample/exact_sum.hpp"

namespace ripsample {

namespace {

constexpr double kMassTol = 1e-10;
constexpr Complex kPhaseCycle[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};

// Smallest integer t >= 1 with 2^t >= v.
int int_log2_ceil(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("log2 ceiling of a nonpositive value");
  }
  int t = 1;
  double p = 2.0;
  while (p * (1.0 + 1e-12) < v) {
    p *= 2.0;
    ++t;
  }
  return t;
}

void check_scale_arg(double v, const char* name) {
  if (!(v > 0.0) || v > 0.5) {
    throw std::invalid_argument(std::string(name) + " must lie in (0, 1/2]");
  }
}

double level_band(int level) { return std::exp2(-0.5 * static_cast<double>(level)); }

double capped_ceiling(int i) { return 9.0 * std::exp2(-static_cast<double>(i)); }

double jump_ceiling(int i, int m) { return 30.0 * std::exp2(-0.5 * static_cast<double>(i + m)); }

std::size_t checked_common_dim(const std::vector<ComplexVector>& g_levels) {
  const std::size_t n = g_levels.front().size();
  if (n == 0) throw std::invalid_argument("net family: empty level vectors");
  for (const ComplexVector& g : g_levels) {
    if (g.size() != n) throw std::invalid_argument("net family: level dimension mismatch");
    if (!all_finite(g)) throw std::invalid_argument("net family: level entries must be finite");
  }
  return n;
}

}  // namespace

double PhaseDistribution::total_mass() const {
  double s = 0.0;
  for (const auto& w : weights) s += w[0] + w[1] + w[2] + w[3];
  return s;
}

void PhaseDistribution::validate() const {
  if (weights.empty()) throw std::invalid_argument("PhaseDistribution: empty");
  for (const auto& w : weights) {
    for (double v : w) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("PhaseDistribution: weights must be finite and >= 0");
      }
    }
  }
  if (std::abs(total_mass() - 1.0) > kMassTol) {
    throw std::invalid_argument("PhaseDistribution: total mass must be 1");
  }
}

PhaseDistribution phase_decompose(const ComplexVector& x) {
  if (x.empty()) throw std::invalid_argument("phase_decompose: empty vector");
  if (!all_finite(x)) throw std::invalid_argument("phase_decompose: entries must be finite");
  if (std::abs(norm1(x) - 1.0) > kMassTol) {
    throw std::invalid_argument("phase_decompose: ||x||_1 must be 1 within 1e-10");
  }
  const double inv_sqrt2 = 0.70710678118654752440;
  PhaseDistribution d;
  d.weights.resize(x.size());
  for (std::size_t l = 0; l < x.size(); ++l) {
    const double a = x[l].real();
    const double b = x[l].imag();
    const double mag = std::abs(x[l]);
    const double c = 0.5 * (mag - (std::abs(a) + std::abs(b)) * inv_sqrt2);
    auto& w = d.weights[l];
    w[0] = std::max(a, 0.0) * inv_sqrt2 + c;
    w[1] = std::max(b, 0.0) * inv_sqrt2;
    w[2] = std::max(-a, 0.0) * inv_sqrt2 + c;
    w[3] = std::max(-b, 0.0) * inv_sqrt2;
  }
  return d;
}

std::string to_string(NetVariant v) {
  return v == NetVariant::Capped ? "capped" : "telescoped";
}

NetParams NetParams::capped(double eps, double eta, double sample_constant) {
  check_scale_arg(eps, "eps");
  check_scale_arg(eta, "eta");
  if (!(sample_constant > 0.0)) throw std::invalid_argument("c_F must be positive");
  NetParams p;
  p.variant = NetVariant::Capped;
  p.eps = eps;
  p.eta = eta;
  p.t = int_log2_ceil(1.0 / eta);
  p.r = int_log2_ceil(1.0 / (eps * eps));
  p.gamma = eta / (2.0 * p.t);
  p.sample_constant = sample_constant;
  p.mult_slack = 3.0 * eps;
  p.add_slack = 9.0 * eta + 2.0 * p.t * p.gamma;
  return p;
}

NetParams NetParams::telescoped(double eps, double eta, double sample_constant) {
  check_scale_arg(eps, "eps");
  check_scale_arg(eta, "eta");
  if (eps < eta) {
    throw std::invalid_argument("telescoped variant requires eps >= eta");
  }
  if (!(sample_constant > 0.0)) throw std::invalid_argument("c_F must be positive");
  NetParams p;
  p.variant = NetVariant::Telescoped;
  p.eps = eps;
  p.eta = eta;
  p.t = int_log2_ceil(1.0 / eta);
  p.r = int_log2_ceil(1.0 / (eps * eps));
  p.gamma = eta / (60.0 * (p.t + p.r));
  p.sample_constant = sample_constant;
  p.mult_slack = 10.0 * eps;
  p.add_slack = 9.0 * eta + 60.0 * (p.t + p.r) * p.gamma;
  return p;
}

std::size_t NetParams::sample_count(int level) const {
  if (level < 1 || level > 62) throw std::invalid_argument("level must lie in [1, 62]");
  const double f =
      std::ceil(sample_constant * std::exp2(static_cast<double>(level)) * std::log2(1.0 / gamma));
  return static_cast<std::size_t>(std::max(1.0, f));
}

ComplexVector sample_g(const ImplicitUnitary& m, const PhaseDistribution& d,
                       int level, const NetParams& params, Rng& rng) {
  const std::size_t n = m.dim();
  if (d.dim() != n) throw std::invalid_argument("sample_g: distribution dimension mismatch");
  d.validate();
  const std::size_t draws = params.sample_count(level);

  std::vector<double> cum(4 * n);
  double acc = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    for (int s = 0; s < 4; ++s) {
      acc += d.weights[l][s];
      cum[4 * l + s] = acc;
    }
  }
  const double total = acc;

  ComplexVector coeff(n, Complex(0.0));
  for (std::size_t i = 0; i < draws; ++i) {
    const double u = rng.next_double() * total;
    const std::size_t idx = std::min<std::size_t>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), 4 * n - 1);
    coeff[idx / 4] += kPhaseCycle[idx % 4];
  }
  const double scale = std::sqrt(2.0) / static_cast<double>(draws);
  for (Complex& v : coeff) v *= scale;
  return m.apply(coeff);
}

std::size_t count_band_violations(const ComplexVector& mx, const ComplexVector& g,
                                  double band, double flatness) {
  if (mx.size() != g.size()) throw std::invalid_argument("count_band_violations: size mismatch");
  const double limit = band * flatness;
  std::size_t count = 0;
  for (std::size_t j = 0; j < mx.size(); ++j) {
    if (std::abs(std::abs(mx[j]) - std::abs(g[j])) > limit) ++count;
  }
  return count;
}

GoodGResult find_good_g(const ImplicitUnitary& m, const ComplexVector& x,
                        const RowSample& q, int level, const NetParams& params,
                        Rng& rng, int max_attempts) {
  const std::size_t n = m.dim();
  require_vector(x, n, "find_good_g");
  if (q.ambient_dim != n) throw std::invalid_argument("find_good_g: sample dimension mismatch");
  if (max_attempts < 1) throw std::invalid_argument("find_good_g: max_attempts must be >= 1");

  const PhaseDistribution d = phase_decompose(x);
  const ComplexVector mx = m.apply(x);
  const double flat = m.flatness();
  const double band = level_band(level);
  const double limit = band * flat;

  GoodGResult result;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    ComplexVector g = sample_g(m, d, level, params, rng);
    std::size_t viol_n = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(std::abs(mx[j]) - std::abs(g[j])) > limit) ++viol_n;
    }
    std::size_t viol_q = 0;
    for (std::size_t idx : q.indices) {
      if (std::abs(std::abs(mx[idx]) - std::abs(g[idx])) > limit) ++viol_q;
    }
    result.g = std::move(g);
    result.attempts = attempt;
    result.violation_fraction_ambient =
        static_cast<double>(viol_n) / static_cast<double>(n);
    result.violation_fraction_sample =
        static_cast<double>(viol_q) / static_cast<double>(q.q());
    if (static_cast<double>(viol_n) <= params.gamma * static_cast<double>(n) &&
        static_cast<double>(viol_q) <= params.gamma * static_cast<double>(q.q())) {
      result.ok = true;
      return result;
    }
  }
  result.ok = false;
  return result;
}

double NetFamily::net_value(std::size_t j) const {
  double acc = 0.0;
  if (variant == NetVariant::Capped) {
    for (const auto& hi : h) acc += hi[j];
  } else {
    for (const auto& chain : delta_chain) {
      for (const auto& dm : chain) acc += dm[j];
    }
  }
  return acc;
}

NetFamily build_capped_family(std::vector<ComplexVector> g_levels,
                              const NetParams& params) {
  if (params.variant != NetVariant::Capped) {
    throw std::invalid_argument("build_capped_family: params built for another variant");
  }
  const int t = params.t;
  if (g_levels.size() != static_cast<std::size_t>(t)) {
    throw std::invalid_argument("build_capped_family: expected t level vectors");
  }
  const std::size_t n = checked_common_dim(g_levels);

  NetFamily f;
  f.variant = NetVariant::Capped;
  f.params = params;
  f.level_sets.assign(t, {});
  f.h.assign(t, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (int i = 1; i <= t; ++i) {
      const double mag = std::abs(g_levels[i - 1][j]);
      if (mag >= 2.0 * level_band(i)) {
        f.level_sets[i - 1].push_back(j);
        f.h[i - 1][j] = std::min(mag * mag, capped_ceiling(i));
        break;
      }
    }
  }
  f.g_levels = std::move(g_levels);
  return f;
}

NetFamily build_telescoped_family(std::vector<ComplexVector> g_levels,
                                  const NetParams& params) {
  if (params.variant != NetVariant::Telescoped) {
    throw std::invalid_argument("build_telescoped_family: params built for another variant");
  }
  const int t = params.t;
  const int r = params.r;
  if (g_levels.size() != static_cast<std::size_t>(t + r)) {
    throw std::invalid_argument("build_telescoped_family: expected t + r level vectors");
  }
  const std::size_t n = checked_common_dim(g_levels);

  NetFamily f;
  f.variant = NetVariant::Telescoped;
  f.params = params;
  f.level_sets.assign(t, {});
  f.h_chain.assign(t, std::vector<std::vector<double>>(r + 1, std::vector<double>(n, 0.0)));
  f.delta_chain = f.h_chain;

  for (std::size_t j = 0; j < n; ++j) {
    for (int i = 1; i <= t; ++i) {
      if (std::abs(g_levels[i - 1][j]) >= 2.0 * level_band(i)) {
        f.level_sets[i - 1].push_back(j);
        for (int m = i; m <= i + r; ++m) {
          const double v = std::norm(g_levels[m - 1][j]);
          f.h_chain[i - 1][m - i][j] = v;
          const double prev = (m == i) ? 0.0 : f.h_chain[i - 1][m - i - 1][j];
          const double jump = v - prev;
          f.delta_chain[i - 1][m - i][j] =
              (std::abs(jump) > jump_ceiling(i, m)) ? 0.0 : jump;
        }
        // The chain of differences telescopes back to its last element; the
        // residue is accumulated with error-free arithmetic so the identity
        // is checked exactly.
        ExactSum residue;
        for (int m = i; m <= i + r; ++m) {
          const double prev = (m == i) ? 0.0 : f.h_chain[i - 1][m - i - 1][j];
          const auto [diff, err] = two_diff(f.h_chain[i - 1][m - i][j], prev);
          residue.add(diff);
          residue.add(err);
        }
        residue.add(-f.h_chain[i - 1][r][j]);
        if (!residue.is_zero()) {
          throw std::logic_error("telescoped family: difference chain failed to telescope");
        }
        break;
      }
    }
  }
  f.g_levels = std::move(g_levels);
  return f;
}

void to_json(nlohmann::json& j, const NetFamily& f) {
  nlohmann::json levels = nlohmann::json::array();
  for (const ComplexVector& g : f.g_levels) {
    nlohmann::json v = nlohmann::json::array();
    for (const Complex& z : g) v.push_back({z.real(), z.imag()});
    levels.push_back(std::move(v));
  }
  j = nlohmann::json{{"variant", to_string(f.variant)},
                     {"eps", f.params.eps},
                     {"eta", f.params.eta},
                     {"t", f.params.t},
                     {"r", f.params.r},
                     {"gamma", f.params.gamma},
                     {"sample_constant", f.params.sample_constant},
                     {"level_sets", f.level_sets},
                     {"g_levels", std::move(levels)}};
  if (f.variant == NetVariant::Capped) {
    j["h"] = f.h;
  } else {
    j["h_chain"] = f.h_chain;
    j["delta_chain"] = f.delta_chain;
  }
}

void to_json(nlohmann::json& j, const CheckItem& item) {
  j = nlohmann::json{{"name", item.name},
                     {"kind", item.kind == CheckKind::TwoSided ? "two-sided" : "lower-bound"},
                     {"lhs", item.lhs},
                     {"rhs", item.rhs},
                     {"eps_slack", item.eps_slack},
                     {"alpha_slack", item.alpha_slack},
                     {"abs_gap", item.abs_gap},
                     {"pass", item.pass}};
  if (item.rel_gap) {
    j["rel_gap"] = *item.rel_gap;
  } else {
    j["rel_gap"] = nullptr;
  }
}

void to_json(nlohmann::json& j, const DecompositionReport& r) {
  j = nlohmann::json{{"variant", to_string(r.variant)},
                     {"N", r.ambient_dim},
                     {"q", r.sample_size},
                     {"items", r.items},
                     {"all_pass", r.all_pass}};
}

namespace {

CheckItem make_item(std::string name, CheckKind kind, double lhs, double rhs,
                    double eps_slack, double alpha_slack) {
  CheckItem item;
  item.name = std::move(name);
  item.kind = kind;
  item.lhs = lhs;
  item.rhs = rhs;
  item.eps_slack = eps_slack;
  item.alpha_slack = alpha_slack;
  if (kind == CheckKind::TwoSided) {
    item.abs_gap = std::abs(lhs - rhs);
    item.pass = approx_within(lhs, rhs, {eps_slack, alpha_slack});
  } else {
    item.abs_gap = rhs - lhs;
    item.pass = lhs >= rhs - alpha_slack;
  }
  if (rhs > 0.0) item.rel_gap = item.abs_gap / rhs;
  return item;
}

}  // namespace

DecompositionReport verify_decomposition(const ImplicitUnitary& m,
                                         const ComplexVector& x,
                                         const RowSample& q,
                                         const NetFamily& family) {
  const std::size_t n = m.dim();
  require_vector(x, n, "verify_decomposition");
  if (q.ambient_dim != n) {
    throw std::invalid_argument("verify_decomposition: sample dimension mismatch");
  }
  if (family.g_levels.empty() || family.g_levels.front().size() != n) {
    throw std::invalid_argument("verify_decomposition: family dimension mismatch");
  }

  const double flat = m.flatness();
  const ComplexVector mx = m.apply(x);
  std::vector<double> energy(n);
  for (std::size_t j = 0; j < n; ++j) energy[j] = std::norm(mx[j]) / (flat * flat);
  std::vector<double> net(n);
  for (std::size_t j = 0; j < n; ++j) net[j] = family.net_value(j);

  double lhs_pop = 0.0, rhs_pop = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    lhs_pop += energy[j];
    rhs_pop += net[j];
  }
  lhs_pop /= static_cast<double>(n);
  rhs_pop /= static_cast<double>(n);

  double lhs_smp = 0.0, rhs_smp = 0.0;
  for (std::size_t idx : q.indices) {
    lhs_smp += energy[idx];
    rhs_smp += net[idx];
  }
  lhs_smp /= static_cast<double>(q.q());
  rhs_smp /= static_cast<double>(q.q());

  const NetParams& p = family.params;
  DecompositionReport report;
  report.variant = family.variant;
  report.ambient_dim = n;
  report.sample_size = q.q();

  if (family.variant == NetVariant::Telescoped) {
    double mass = 0.0;
    for (int i = 1; i <= p.t; ++i) {
      mass += std::exp2(-static_cast<double>(i)) *
              static_cast<double>(family.level_sets[i - 1].size());
    }
    mass /= static_cast<double>(n);
    report.items.push_back(make_item("population-energy-vs-level-mass",
                                     CheckKind::LowerBound, lhs_pop, mass, 0.0,
                                     p.eta));
  }
  report.items.push_back(make_item("sample-average-vs-net-sum", CheckKind::TwoSided,
                                   lhs_smp, rhs_smp, p.mult_slack, p.add_slack));
  report.items.push_back(make_item("population-average-vs-net-sum",
                                   CheckKind::TwoSided, lhs_pop, rhs_pop,
                                   p.mult_slack, p.add_slack));

  report.all_pass = true;
  for (const CheckItem& item : report.items) report.all_pass &= item.pass;
  return report;
}

std::string to_string(BoundedKind kind) {
  switch (kind) {
    case BoundedKind::Constant: return "constant";
    case BoundedKind::Bernoulli: return "bernoulli";
    case BoundedKind::UniformReal: return "uniform";
    case BoundedKind::Rademacher: return "rademacher";
    case BoundedKind::UnitPhase: return "unit-phase";
  }
  return "unknown";
}

void BoundedDistribution::validate() const {
  if (!std::isfinite(a) || !std::isfinite(p) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("BoundedDistribution: parameters must be finite");
  }
  if (kind == BoundedKind::Bernoulli && (p < 0.0 || p > 1.0)) {
    throw std::invalid_argument("BoundedDistribution: p must lie in [0, 1]");
  }
  if (kind == BoundedKind::UniformReal && lo > hi) {
    throw std::invalid_argument("BoundedDistribution: need lo <= hi");
  }
}

double BoundedDistribution::bound() const {
  if (kind == BoundedKind::UniformReal) return std::max(std::abs(lo), std::abs(hi));
  return std::abs(a);
}

Complex BoundedDistribution::mean() const {
  switch (kind) {
    case BoundedKind::Constant: return Complex(a, 0.0);
    case BoundedKind::Bernoulli: return Complex(p * a, 0.0);
    case BoundedKind::UniformReal: return Complex(0.5 * (lo + hi), 0.0);
    case BoundedKind::Rademacher: return Complex(0.0, 0.0);
    case BoundedKind::UnitPhase: return Complex(0.0, 0.0);
  }
  return Complex(0.0);
}

double BoundedDistribution::abs_mean() const {
  switch (kind) {
    case BoundedKind::Constant: return std::abs(a);
    case BoundedKind::Bernoulli: return p * std::abs(a);
    case BoundedKind::UniformReal: {
      if (lo >= 0.0) return 0.5 * (lo + hi);
      if (hi <= 0.0) return -0.5 * (lo + hi);
      return 0.5 * (lo * lo + hi * hi) / (hi - lo);
    }
    case BoundedKind::Rademacher: return std::abs(a);
    case BoundedKind::UnitPhase: return std::abs(a);
  }
  return 0.0;
}

Complex BoundedDistribution::draw(Rng& rng) const {
  switch (kind) {
    case BoundedKind::Constant: return Complex(a, 0.0);
    case BoundedKind::Bernoulli: return Complex(rng.next_double() < p ? a : 0.0, 0.0);
    case BoundedKind::UniformReal: return Complex(rng.uniform(lo, hi), 0.0);
    case BoundedKind::Rademacher: return Complex((rng.next_u64() & 1) ? a : -a, 0.0);
    case BoundedKind::UnitPhase:
      return std::polar(std::abs(a), 6.283185307179586476925286766559 * rng.next_double());
  }
  return Complex(0.0);
}

double tail_probe(const BoundedDistribution& dist, std::size_t n_vars,
                  const ApproxSpec& spec, std::size_t trials, Rng& rng) {
  dist.validate();
  if (n_vars < 1) throw std::invalid_argument("tail_probe: n_vars must be >= 1");
  if (trials < 1) throw std::invalid_argument("tail_probe: trials must be >= 1");

  const Complex mu = dist.mean();
  std::size_t failures = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Complex acc(0.0);
    for (std::size_t i = 0; i < n_vars; ++i) acc += dist.draw(rng);
    acc /= static_cast<double>(n_vars);
    const bool ok = dist.complex_valued()
                        ? approx_within(std::abs(acc), std::abs(mu), spec)
                        : approx_within(acc.real(), mu.real(), spec);
    if (!ok) ++failures;
  }
  return static_cast<double>(failures) / static_cast<double>(trials);
}

}  // namespace ripsample
