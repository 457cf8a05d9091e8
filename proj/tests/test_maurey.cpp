#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "ripsample/exact_sum.hpp"
#include "ripsample/maurey.hpp"
#include "ripsample/rng.hpp"
#include "ripsample/sampling.hpp"
#include "ripsample/unitary.hpp"

using namespace ripsample;

namespace {

ComplexVector random_unit_l1(std::size_t n, Rng& rng, std::size_t support = 0) {
  ComplexVector x(n, Complex(0.0));
  const std::size_t s = support == 0 ? n : support;
  for (std::size_t i = 0; i < s; ++i) {
    x[i % n] += rng.complex_normal();
  }
  const double nrm = norm1(x);
  for (auto& v : x) v /= nrm;
  return x;
}

constexpr Complex kPhases[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};

}  // namespace

TEST_CASE("phase decomposition reconstructs x and carries unit mass") {
  Rng rng(2001);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + trial % 16;
    const ComplexVector x = random_unit_l1(n, rng);
    const PhaseDistribution d = phase_decompose(x);
    REQUIRE(d.dim() == n);
    d.validate();
    CHECK(std::abs(d.total_mass() - 1.0) <= 1e-12);
    const double sqrt2 = std::sqrt(2.0);
    for (std::size_t l = 0; l < n; ++l) {
      double mass = 0.0;
      Complex recon(0.0);
      for (int s = 0; s < 4; ++s) {
        CHECK(d.weights[l][s] >= 0.0);
        mass += d.weights[l][s];
        recon += kPhases[s] * d.weights[l][s];
      }
      recon *= sqrt2;
      CHECK(std::abs(mass - std::abs(x[l])) <= 1e-12);
      CHECK(std::abs(recon - x[l]) <= 1e-12);
    }
  }
}

TEST_CASE("phase decomposition handles degenerate inputs") {
  // Mass on one coordinate, purely real / imaginary / negative entries.
  for (const Complex v : {Complex(1.0, 0.0), Complex(-1.0, 0.0), Complex(0.0, 1.0),
                          Complex(0.0, -1.0),
                          Complex(0.6, -0.8)}) {
    ComplexVector x(5, Complex(0.0));
    x[3] = v / std::abs(v);
    const PhaseDistribution d = phase_decompose(x);
    d.validate();
    for (std::size_t l = 0; l < 5; ++l) {
      if (l == 3) continue;
      for (int s = 0; s < 4; ++s) CHECK(d.weights[l][s] == 0.0);
    }
    Complex recon(0.0);
    for (int s = 0; s < 4; ++s) recon += kPhases[s] * d.weights[3][s];
    CHECK(std::abs(std::sqrt(2.0) * recon - x[3]) <= 1e-12);
  }

  ComplexVector not_unit(4, Complex(0.5, 0.0));  // l1 mass 2
  CHECK_THROWS_AS(phase_decompose(not_unit), std::invalid_argument);
  CHECK_THROWS_AS(phase_decompose(ComplexVector{}), std::invalid_argument);

  PhaseDistribution bad;
  bad.weights.assign(2, {0.5, 0.0, 0.0, 0.0});
  CHECK_NOTHROW(bad.validate());
  bad.weights[0][0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("net parameters follow the scale formulas") {
  const NetParams cap = NetParams::capped(0.125, 0.125);
  CHECK(cap.t == 3);   // 2^3 = 8 = 1/eta
  CHECK(cap.r == 6);   // 2^6 = 64 = 1/eps^2
  CHECK(cap.gamma == doctest::Approx(0.125 / 6.0));
  CHECK(cap.mult_slack == doctest::Approx(0.375));
  CHECK(cap.add_slack == doctest::Approx(9.0 * 0.125 + 2.0 * 3.0 * cap.gamma));
  CHECK(cap.max_level() == 9);

  const NetParams tel = NetParams::telescoped(0.125, 0.125);
  CHECK(tel.t == 3);
  CHECK(tel.r == 6);
  CHECK(tel.gamma == doctest::Approx(0.125 / (60.0 * 9.0)));
  CHECK(tel.mult_slack == doctest::Approx(1.25));
  CHECK(tel.add_slack == doctest::Approx(9.0 * 0.125 + 60.0 * 9.0 * tel.gamma));

  // Rounding of the integer logs.
  CHECK(NetParams::capped(0.5, 0.5).t == 1);
  CHECK(NetParams::capped(0.5, 0.5).r == 2);
  CHECK(NetParams::capped(0.3, 0.3).t == 2);   // 1/0.3 = 3.33 -> 2^2
  CHECK(NetParams::capped(0.3, 0.3).r == 4);   // 1/0.09 = 11.1 -> 2^4

  CHECK_THROWS_AS(NetParams::capped(0.6, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(NetParams::capped(0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(NetParams::telescoped(0.1, 0.25), std::invalid_argument);
  CHECK_NOTHROW(NetParams::telescoped(0.25, 0.25));

  // |F| = ceil(c_F * 2^level * log2(1/gamma)).
  const double lg = std::log2(1.0 / cap.gamma);
  for (int level = 1; level <= 9; ++level) {
    CHECK(cap.sample_count(level) ==
          static_cast<std::size_t>(std::ceil(8.0 * std::exp2(level) * lg)));
  }
  CHECK_THROWS_AS(cap.sample_count(0), std::invalid_argument);
  CHECK_THROWS_AS(cap.sample_count(63), std::invalid_argument);
}

TEST_CASE("sampled vectors are bounded and unbiased for Mx") {
  const std::size_t n = 16;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  Rng rng(909);
  const ComplexVector x = random_unit_l1(n, rng);
  const PhaseDistribution d = phase_decompose(x);
  const ComplexVector mx = m.apply(x);
  const NetParams params = NetParams::capped(0.25, 0.25);
  const int level = 2;
  const std::size_t draws = params.sample_count(level);

  const std::size_t reps = 1500;
  ComplexVector mean(n, Complex(0.0));
  for (std::size_t rep = 0; rep < reps; ++rep) {
    const ComplexVector g = sample_g(m, d, level, params, rng);
    REQUIRE(g.size() == n);
    // ||g||_inf <= sqrt(2) * ||M||_inf always (triangle inequality on the
    // phase-coefficient average).
    for (const Complex& v : g) {
      CHECK(std::abs(v) <= std::sqrt(2.0) * m.flatness() + 1e-12);
    }
    for (std::size_t j = 0; j < n; ++j) mean[j] += g[j];
  }
  for (auto& v : mean) v /= static_cast<double>(reps);

  // Per-coordinate standard error of the g average: each draw contributes a
  // phase column of modulus sqrt(2)/sqrt(N) per component, so a draw of g_j
  // has standard deviation at most sqrt(2/N)/sqrt(draws) per real part.
  const double se = std::sqrt(2.0 / static_cast<double>(n)) /
                    std::sqrt(static_cast<double>(draws) * static_cast<double>(reps));
  std::size_t within = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(mean[j] - mx[j]) <= 5.0 * se) ++within;
  }
  // Frozen seed: the draw is deterministic, and all coordinates sit inside
  // five standard errors.
  CHECK(within == n);
}

TEST_CASE("band violation counting is exact") {
  const ComplexVector mx{{0.5, 0.0}, {0.0, 0.3}, {-0.2, 0.0}, {0.0, 0.0}};
  const ComplexVector g{{0.4, 0.0}, {0.3, 0.0}, {0.0, 0.0}, {0.0, 0.05}};
  // |(|mx| - |g|)| = {0.1, 0.0, 0.2, 0.05}; with band * flatness = 0.1 the
  // strict inequality trips only on 0.2.
  CHECK(count_band_violations(mx, g, 0.2, 0.5) == 1);
  CHECK(count_band_violations(mx, g, 0.09, 1.0) == 2);
  CHECK(count_band_violations(mx, g, 0.3, 1.0) == 0);
  CHECK_THROWS_AS(count_band_violations(mx, ComplexVector(3), 0.1, 1.0),
                  std::invalid_argument);
}

TEST_CASE("find_good_g returns band-compliant draws with the attempt count") {
  const std::size_t n = 32;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  Rng rng(31337);
  const ComplexVector x = random_unit_l1(n, rng, 4);
  const RowSample q = sample_rows(n, 12, 55);
  const NetParams params = NetParams::capped(0.25, 0.25);

  const GoodGResult res = find_good_g(m, x, q, 1, params, rng);
  REQUIRE(res.ok);
  CHECK(res.attempts >= 1);
  CHECK(res.violation_fraction_ambient <= params.gamma);
  CHECK(res.violation_fraction_sample <= params.gamma);

  // The reported fractions match a direct recount of the returned g.
  const ComplexVector mx = m.apply(x);
  const double limit = std::exp2(-0.5) * m.flatness();
  std::size_t viol = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(std::abs(mx[j]) - std::abs(res.g[j])) > limit) ++viol;
  }
  CHECK(res.violation_fraction_ambient ==
        doctest::Approx(double(viol) / double(n)));

  // Identical seeds reproduce the draw bit for bit.
  Rng r1(424242), r2(424242);
  const GoodGResult a = find_good_g(m, x, q, 2, params, r1);
  const GoodGResult b = find_good_g(m, x, q, 2, params, r2);
  CHECK(a.attempts == b.attempts);
  CHECK(a.g == b.g);

  CHECK_THROWS_AS(find_good_g(m, x, q, 1, params, rng, 0), std::invalid_argument);
}

namespace {

// Synthetic level vectors: magnitude 2^{-level/2} * U with U ~ Uniform[0, 6]
// and a random phase, so coordinates straddle the 2 * 2^{-i/2} membership
// threshold and occasionally jump across the clipping ceiling.
std::vector<ComplexVector> synthetic_levels(std::size_t n, int count, int first_level,
                                            Rng& rng) {
  std::vector<ComplexVector> g(count, ComplexVector(n));
  for (int v = 0; v < count; ++v) {
    const double scale = std::exp2(-0.5 * (first_level + v));
    for (std::size_t j = 0; j < n; ++j) {
      g[v][j] = std::polar(scale * rng.uniform(0.0, 6.0), rng.uniform(0.0, 6.283185));
    }
  }
  return g;
}

}  // namespace

TEST_CASE("capped families obey the membership rule, disjointness, and the cap") {
  const std::size_t n = 16;
  const NetParams params = NetParams::capped(0.25, 0.25);  // t = 2, r = 4
  Rng rng(60601);
  for (int trial = 0; trial < 10000; ++trial) {
    // Levels i + r for i = 1..t.
    auto levels = synthetic_levels(n, params.t, 1 + params.r, rng);
    const NetFamily f = build_capped_family(levels, params);
    REQUIRE(f.level_sets.size() == static_cast<std::size_t>(params.t));
    REQUIRE(f.h.size() == static_cast<std::size_t>(params.t));

    std::vector<int> member(n, 0);
    for (int i = 1; i <= params.t; ++i) {
      const double threshold = 2.0 * std::exp2(-0.5 * i);
      const double cap = 9.0 * std::exp2(-double(i));
      for (std::size_t j : f.level_sets[i - 1]) {
        ++member[j];
        // Definitional membership: above threshold here, below on all
        // earlier levels.
        CHECK(std::abs(levels[i - 1][j]) >= threshold);
        for (int prev = 1; prev < i; ++prev) {
          CHECK(std::abs(levels[prev - 1][j]) < 2.0 * std::exp2(-0.5 * prev));
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        const bool in_set = std::binary_search(f.level_sets[i - 1].begin(),
                                               f.level_sets[i - 1].end(), j);
        if (!in_set) {
          CHECK(f.h[i - 1][j] == 0.0);
        } else {
          CHECK(f.h[i - 1][j] ==
                std::min(std::norm(levels[i - 1][j]), cap));
          CHECK(f.h[i - 1][j] <= cap);
        }
      }
    }
    // Level sets are disjoint.
    for (std::size_t j = 0; j < n; ++j) CHECK(member[j] <= 1);
  }
}

TEST_CASE("telescoped families clip jumps and telescope exactly") {
  const std::size_t n = 16;
  const NetParams params = NetParams::telescoped(0.25, 0.25);  // t = 2, r = 4
  Rng rng(70707);
  std::size_t clipped_jumps = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto levels = synthetic_levels(n, params.t + params.r, 1, rng);
    const NetFamily f = build_telescoped_family(levels, params);
    REQUIRE(f.h_chain.size() == static_cast<std::size_t>(params.t));
    REQUIRE(f.delta_chain.size() == static_cast<std::size_t>(params.t));

    for (int i = 1; i <= params.t; ++i) {
      const double threshold = 2.0 * std::exp2(-0.5 * i);
      for (std::size_t j : f.level_sets[i - 1]) {
        CHECK(std::abs(levels[i - 1][j]) >= threshold);
        for (int prev = 1; prev < i; ++prev) {
          CHECK(std::abs(levels[prev - 1][j]) < 2.0 * std::exp2(-0.5 * prev));
        }
      }
      REQUIRE(f.h_chain[i - 1].size() == static_cast<std::size_t>(params.r + 1));
      for (int m = i; m <= i + params.r; ++m) {
        const double ceiling = 30.0 * std::exp2(-0.5 * (i + m));
        for (std::size_t j = 0; j < n; ++j) {
          const bool in_set = std::binary_search(f.level_sets[i - 1].begin(),
                                                 f.level_sets[i - 1].end(), j);
          const double h = f.h_chain[i - 1][m - i][j];
          const double d = f.delta_chain[i - 1][m - i][j];
          if (!in_set) {
            CHECK(h == 0.0);
            CHECK(d == 0.0);
            continue;
          }
          CHECK(h == std::norm(levels[m - 1][j]));
          // Stored differences never exceed the clipping ceiling.
          CHECK(std::abs(d) <= ceiling);
          const double prev = (m == i) ? 0.0 : f.h_chain[i - 1][m - i - 1][j];
          const double jump = h - prev;
          if (std::abs(jump) > ceiling) {
            CHECK(d == 0.0);
            ++clipped_jumps;
          } else {
            CHECK(d == jump);
          }
        }
      }
      // The unclipped difference chain telescopes exactly: summed in order
      // with exact arithmetic it reproduces the last element bit for bit.
      for (std::size_t j : f.level_sets[i - 1]) {
        ExactSum residue;
        for (int m = i; m <= i + params.r; ++m) {
          const double prev = (m == i) ? 0.0 : f.h_chain[i - 1][m - i - 1][j];
          const auto [diff, err] = two_diff(f.h_chain[i - 1][m - i][j], prev);
          residue.add(diff);
          residue.add(err);
        }
        residue.add(-f.h_chain[i - 1][params.r][j]);
        CHECK(residue.is_zero());
      }
    }
  }
  // The synthetic magnitudes do produce clipped jumps, so the clipping path
  // is genuinely exercised.
  CHECK(clipped_jumps > 0);
}

TEST_CASE("family builders validate their inputs") {
  const NetParams cap = NetParams::capped(0.25, 0.25);
  const NetParams tel = NetParams::telescoped(0.25, 0.25);
  Rng rng(8);
  auto levels = synthetic_levels(8, cap.t, 1 + cap.r, rng);
  CHECK_THROWS_AS(build_capped_family(levels, tel), std::invalid_argument);
  CHECK_THROWS_AS(build_telescoped_family(levels, tel), std::invalid_argument);
  levels.pop_back();
  CHECK_THROWS_AS(build_capped_family(levels, cap), std::invalid_argument);
}

TEST_CASE("full-sample verification puts sample and population in exact agreement") {
  const std::size_t n = 64;
  const ImplicitUnitary m = ImplicitUnitary::dft(n);
  Rng rng(5005);
  const ComplexVector x = random_unit_l1(n, rng, 4);
  const RowSample q = full_sample(n);
  const double flat = m.flatness();

  for (const bool telescoped : {false, true}) {
    const NetParams params = telescoped ? NetParams::telescoped(0.125, 0.125)
                                        : NetParams::capped(0.125, 0.125);
    std::vector<ComplexVector> levels;
    bool all_ok = true;
    const int first = telescoped ? 1 : params.r + 1;
    const int count = telescoped ? params.t + params.r : params.t;
    for (int v = 0; v < count; ++v) {
      const GoodGResult res = find_good_g(m, x, q, first + v, params, rng);
      all_ok &= res.ok;
      ComplexVector g = res.g;
      for (auto& z : g) z /= flat;  // net builders take normalized levels
      levels.push_back(std::move(g));
    }
    REQUIRE(all_ok);
    const NetFamily family = telescoped ? build_telescoped_family(levels, params)
                                        : build_capped_family(levels, params);
    const DecompositionReport report = verify_decomposition(m, x, q, family);
    CHECK(report.ambient_dim == n);
    CHECK(report.sample_size == n);

    // Sample multiset = population: both comparisons see identical numbers.
    const CheckItem* smp = nullptr;
    const CheckItem* pop = nullptr;
    for (const CheckItem& item : report.items) {
      if (item.name == "sample-average-vs-net-sum") smp = &item;
      if (item.name == "population-average-vs-net-sum") pop = &item;
    }
    REQUIRE(smp != nullptr);
    REQUIRE(pop != nullptr);
    CHECK(smp->lhs == pop->lhs);
    CHECK(smp->rhs == pop->rhs);
    CHECK(smp->pass);
    CHECK(pop->pass);

    if (telescoped) {
      CHECK(report.items.size() == 3);
      CHECK(report.items.front().name == "population-energy-vs-level-mass");
      CHECK(report.items.front().kind == CheckKind::LowerBound);
      CHECK(report.items.front().pass);
    } else {
      CHECK(report.items.size() == 2);
    }
    CHECK(report.all_pass);
  }
}

TEST_CASE("bounded distributions expose correct moments and draws") {
  Rng rng(64000);

  BoundedDistribution bern{BoundedKind::Bernoulli, 2.0, 0.25, -1.0, 1.0};
  CHECK(bern.mean().real() == doctest::Approx(0.5));
  CHECK(bern.abs_mean() == doctest::Approx(0.5));
  CHECK(bern.bound() == doctest::Approx(2.0));
  for (int i = 0; i < 200; ++i) {
    const Complex v = bern.draw(rng);
    CHECK((v == Complex(0.0, 0.0) || v == Complex(2.0, 0.0)));
  }

  BoundedDistribution uni{BoundedKind::UniformReal, 1.0, 0.5, -1.0, 3.0};
  CHECK(uni.mean().real() == doctest::Approx(1.0));
  // Straddling zero: E|X| = (lo^2 + hi^2) / (2 (hi - lo)).
  CHECK(uni.abs_mean() == doctest::Approx((1.0 + 9.0) / (2.0 * 4.0)));
  CHECK(uni.bound() == doctest::Approx(3.0));

  BoundedDistribution pos{BoundedKind::UniformReal, 1.0, 0.5, 1.0, 2.0};
  CHECK(pos.abs_mean() == doctest::Approx(1.5));

  BoundedDistribution rad{BoundedKind::Rademacher, 1.5, 0.5, -1.0, 1.0};
  CHECK(rad.mean().real() == 0.0);
  CHECK(rad.abs_mean() == doctest::Approx(1.5));
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(std::abs(rad.draw(rng).real()) - 1.5) < 1e-15);
  }

  BoundedDistribution phase{BoundedKind::UnitPhase, 0.5, 0.5, -1.0, 1.0};
  CHECK(phase.complex_valued());
  CHECK(std::abs(phase.mean()) == 0.0);
  CHECK(phase.abs_mean() == doctest::Approx(0.5));
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(phase.draw(rng)) == doctest::Approx(0.5).epsilon(1e-12));
  }

  BoundedDistribution bad{BoundedKind::Bernoulli, 1.0, 1.5, -1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  BoundedDistribution bad2{BoundedKind::UniformReal, 1.0, 0.5, 2.0, 1.0};
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}

TEST_CASE("tail probe degenerate and deterministic behavior") {
  Rng rng(111);
  // A constant variable never leaves any band containing its mean.
  BoundedDistribution cst{BoundedKind::Constant, 1.0, 0.5, -1.0, 1.0};
  CHECK(tail_probe(cst, 3, {0.0, 1e-12}, 50, rng) == 0.0);

  // A single Rademacher draw (+-1) always leaves the band [-1/2, 1/2].
  BoundedDistribution rad{BoundedKind::Rademacher, 1.0, 0.5, -1.0, 1.0};
  CHECK(tail_probe(rad, 1, {0.0, 0.5}, 50, rng) == 1.0);

  Rng r1(5), r2(5);
  BoundedDistribution uni{BoundedKind::UniformReal, 1.0, 0.5, -1.0, 1.0};
  CHECK(tail_probe(uni, 50, {0.0, 0.05}, 200, r1) ==
        tail_probe(uni, 50, {0.0, 0.05}, 200, r2));

  CHECK_THROWS_AS(tail_probe(uni, 0, {0.0, 0.1}, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(tail_probe(uni, 10, {0.0, 0.1}, 0, rng), std::invalid_argument);
}
