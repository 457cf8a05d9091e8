#include "ripsample/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>

#include "ripsample/linalg.hpp"
#include "ripsample/maurey.hpp"
#include "ripsample/parallel.hpp"
#include "ripsample/recovery.hpp"
#include "ripsample/rip.hpp"
#include "ripsample/rng.hpp"
#include "ripsample/sampling.hpp"
#include "ripsample/unitary.hpp"

namespace ripsample {

namespace {

constexpr int kSchemaVersion = 1;

const std::set<std::string>& known_kinds() {
  static const std::set<std::string> kinds = {
      "rip-exact",  "rip-scaling",    "maurey-verify",
      "tail-probe", "recovery-phase", "g-hist"};
  return kinds;
}

// ---------------------------------------------------------------------------
// Seed plumbing: every cell/trial gets an independent stream derived from the
// master seed and its own coordinates, so results are byte-stable under
// scheduling and extendable in any one coordinate.

std::uint64_t fold_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = detail::splitmix64(master);
  for (std::uint64_t p : parts) {
    h = detail::splitmix64(h ^ (0x9E3779B97F4A7C15ULL * (p + 1)));
  }
  return h;
}

std::uint64_t double_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(idx[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config access helpers (strict typing, positive ranges).

std::uint64_t get_u64(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError("config key \"" + key + "\" must be a nonnegative integer");
}

std::size_t get_count(const nlohmann::json& v, const std::string& key) {
  const std::uint64_t u = get_u64(v, key);
  if (u < 1) throw ConfigError("config key \"" + key + "\" must be >= 1");
  return static_cast<std::size_t>(u);
}

double get_real(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key \"" + key + "\" must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("config key \"" + key + "\" must be finite");
  return d;
}

std::string get_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key \"" + key + "\" must be a string");
  return v.get<std::string>();
}

bool get_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key \"" + key + "\" must be a boolean");
  return v.get<bool>();
}

std::vector<std::size_t> get_count_grid(const nlohmann::json& v, const std::string& key) {
  std::vector<std::size_t> grid;
  if (v.is_array()) {
    for (const auto& e : v) grid.push_back(get_count(e, key));
  } else {
    grid.push_back(get_count(v, key));
  }
  if (grid.empty()) throw ConfigError("config key \"" + key + "\" must not be an empty grid");
  return grid;
}

std::vector<double> get_real_grid(const nlohmann::json& v, const std::string& key) {
  std::vector<double> grid;
  if (v.is_array()) {
    for (const auto& e : v) grid.push_back(get_real(e, key));
  } else {
    grid.push_back(get_real(v, key));
  }
  if (grid.empty()) throw ConfigError("config key \"" + key + "\" must not be an empty grid");
  return grid;
}

const std::set<std::string>& allowed_keys(const std::string& kind) {
  static const std::set<std::string> global = {"kind", "seed", "out", "format", "threads"};
  static const std::map<std::string, std::set<std::string>> per_kind = {
      {"rip-exact", {"unitary", "N", "k", "q", "trials", "enumeration_budget"}},
      {"rip-scaling",
       {"unitary", "N", "k", "eps", "support_trials", "exhaustive", "target_success",
        "resamples", "enumeration_budget"}},
      {"maurey-verify", {"unitary", "N", "q", "eps", "eta", "trials", "c_f", "c_q", "sparsity"}},
      {"tail-probe", {"N", "trials"}},
      {"recovery-phase",
       {"unitary", "N", "k", "q", "trials", "algorithm", "signal", "success_tol", "max_iters"}},
      {"g-hist",
       {"unitary", "N", "eps", "eta", "trials", "c_f", "sparsity", "variant", "level",
        "histogram_bins"}},
  };
  static std::map<std::string, std::set<std::string>> merged = [] {
    std::map<std::string, std::set<std::string>> m;
    for (const auto& [kind_name, keys] : per_kind) {
      std::set<std::string> s = global;
      s.insert(keys.begin(), keys.end());
      m[kind_name] = std::move(s);
    }
    return m;
  }();
  return merged.at(kind);
}

bool uses_key(const std::string& kind, const char* key) {
  const auto& keys = allowed_keys(kind);
  return keys.count(key) != 0;
}

}  // namespace

std::string to_string(OutputFormat format) {
  return format == OutputFormat::Csv ? "csv" : "json";
}

OutputFormat output_format_from_string(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ConfigError("unknown output format \"" + name + "\" (expected csv or json)");
}

ExperimentConfig default_config(const std::string& kind) {
  if (!known_kinds().count(kind)) {
    throw ConfigError("unknown experiment kind \"" + kind + "\"");
  }
  ExperimentConfig c;
  c.kind = kind;
  if (kind == "rip-exact") {
    c.n_grid = {12};
    c.k_grid = {2};
    c.q_grid = {6};
    c.trials = 1;
    c.format = OutputFormat::Json;
  } else if (kind == "rip-scaling") {
    c.n_grid = {256};
    c.k_grid = {2, 4, 8};
    c.eps_grid = {0.5};
    c.trials = 1;
    // The binary search locates a 90%-success quantile; 400 resamples keep the
    // per-probe estimate tight enough (sigma ~ 1.5%) that the located q* is
    // stable across master seeds.
    c.resamples = 400;
    c.format = OutputFormat::Csv;
  } else if (kind == "maurey-verify") {
    c.n_grid = {512};
    c.eps_grid = {0.125};
    c.eta_grid = {0.125};
    c.trials = 100;
    c.format = OutputFormat::Json;
  } else if (kind == "tail-probe") {
    c.n_grid = {1000, 4000};
    c.trials = 10000;
    c.format = OutputFormat::Csv;
  } else if (kind == "recovery-phase") {
    c.n_grid = {1024};
    c.k_grid = {8};
    c.q_grid = {320};
    c.trials = 100;
    c.format = OutputFormat::Csv;
  } else {  // g-hist
    c.n_grid = {256};
    c.eps_grid = {0.125};
    c.eta_grid = {0.125};
    c.trials = 1;
    c.format = OutputFormat::Csv;
  }
  return c;
}

void validate_config(const ExperimentConfig& c) {
  if (!known_kinds().count(c.kind)) {
    throw ConfigError("unknown experiment kind \"" + c.kind + "\"");
  }
  if (c.threads < 1 || c.threads > 256) {
    throw ConfigError("threads must lie in [1, 256]");
  }
  if (c.unitary != "dft" && c.unitary != "hadamard") {
    throw ConfigError("unitary must be \"dft\" or \"hadamard\"");
  }
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.n_grid.empty()) throw ConfigError("N grid must not be empty");
  for (std::size_t n : c.n_grid) {
    if (n < 2 && c.kind != "tail-probe") throw ConfigError("N must be >= 2");
  }

  // Fast-path ensemble experiments require power-of-two N; rip-exact also
  // accepts arbitrary N through the direct-summation DFT.
  const bool ensemble = c.kind == "rip-scaling" || c.kind == "maurey-verify" ||
                        c.kind == "recovery-phase" || c.kind == "g-hist";
  if (c.kind != "tail-probe" && (ensemble || c.unitary == "hadamard")) {
    for (std::size_t n : c.n_grid) {
      if (!is_power_of_two(n)) {
        throw ConfigError("N = " + std::to_string(n) + " must be a power of two for " +
                          (c.unitary == "hadamard" ? "hadamard matrices" : c.kind));
      }
    }
  }

  if (uses_key(c.kind, "k")) {
    if (c.k_grid.empty()) throw ConfigError("k grid must not be empty");
    for (std::size_t k : c.k_grid) {
      for (std::size_t n : c.n_grid) {
        if (k > n) {
          throw ConfigError("k = " + std::to_string(k) + " exceeds N = " + std::to_string(n));
        }
      }
    }
  }
  if (uses_key(c.kind, "q") && c.kind != "maurey-verify" && c.q_grid.empty()) {
    throw ConfigError("q grid must not be empty");
  }
  if (uses_key(c.kind, "eps")) {
    if (c.eps_grid.empty()) throw ConfigError("eps grid must not be empty");
    const double hi = c.kind == "rip-scaling" ? 1.0 : 0.5;
    for (double e : c.eps_grid) {
      if (!(e > 0.0) || e > hi) {
        throw ConfigError("eps must lie in (0, " + fmt(hi) + "] for " + c.kind);
      }
    }
  }
  if (uses_key(c.kind, "eta")) {
    if (c.eta_grid.empty()) throw ConfigError("eta grid must not be empty");
    for (double e : c.eta_grid) {
      if (!(e > 0.0) || e > 0.5) throw ConfigError("eta must lie in (0, 1/2]");
    }
    // Both net variants run; the telescoped one needs eps >= eta.
    if (c.kind == "maurey-verify" || (c.kind == "g-hist" && c.variant == "telescoped")) {
      for (double eps : c.eps_grid) {
        for (double eta : c.eta_grid) {
          if (eps < eta) throw ConfigError("the telescoped variant requires eps >= eta");
        }
      }
    }
  }

  if (c.enumeration_budget < 1) throw ConfigError("enumeration_budget must be >= 1");
  if (c.support_trials < 1) throw ConfigError("support_trials must be >= 1");
  if (!(c.target_success > 0.0) || c.target_success > 1.0) {
    throw ConfigError("target_success must lie in (0, 1]");
  }
  if (c.resamples < 1) throw ConfigError("resamples must be >= 1");
  if (!(c.c_f > 0.0)) throw ConfigError("c_f must be positive");
  if (!(c.c_q > 0.0)) throw ConfigError("c_q must be positive");
  if (c.sparsity < 1) throw ConfigError("sparsity must be >= 1");
  if (uses_key(c.kind, "sparsity")) {
    for (std::size_t n : c.n_grid) {
      if (c.sparsity > n) throw ConfigError("sparsity exceeds N");
    }
  }
  if (c.variant != "capped" && c.variant != "telescoped") {
    throw ConfigError("variant must be \"capped\" or \"telescoped\"");
  }
  if (c.level < 0) throw ConfigError("level must be >= 0");
  if (c.kind == "g-hist" && c.level > 0) {
    for (double eps : c.eps_grid) {
      for (double eta : c.eta_grid) {
        const NetParams p = c.variant == "capped" ? NetParams::capped(eps, eta, c.c_f)
                                                  : NetParams::telescoped(eps, eta, c.c_f);
        if (c.level > p.max_level()) {
          throw ConfigError("level " + std::to_string(c.level) + " exceeds t+r = " +
                            std::to_string(p.max_level()) + " for eps=" + fmt(eps) +
                            ", eta=" + fmt(eta));
        }
      }
    }
  }
  if (c.histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");
  if (c.algorithm != "iht" && c.algorithm != "omp" && c.algorithm != "both") {
    throw ConfigError("algorithm must be \"iht\", \"omp\" or \"both\"");
  }
  if (c.signal != "rademacher" && c.signal != "gaussian") {
    throw ConfigError("signal must be \"rademacher\" or \"gaussian\"");
  }
  if (!(c.success_tol > 0.0)) throw ConfigError("success_tol must be positive");
  if (c.max_iters < 1) throw ConfigError("max_iters must be >= 1");
}

ExperimentConfig parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const auto kind_it = doc.find("kind");
  if (kind_it == doc.end()) throw ConfigError("config requires a \"kind\" key");
  ExperimentConfig c = default_config(get_string(*kind_it, "kind"));

  const auto& allowed = allowed_keys(c.kind);
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) {
      std::string keys;
      for (const std::string& k : allowed) {
        if (!keys.empty()) keys += ", ";
        keys += k;
      }
      throw ConfigError("unknown config key \"" + key + "\" for kind " + c.kind +
                        " (accepted: " + keys + ")");
    }
    if (key == "kind") continue;
    if (key == "seed") c.seed = get_u64(value, key);
    else if (key == "out") c.out = get_string(value, key);
    else if (key == "format") c.format = output_format_from_string(get_string(value, key));
    else if (key == "threads") c.threads = static_cast<int>(get_count(value, key));
    else if (key == "unitary") c.unitary = get_string(value, key);
    else if (key == "N") c.n_grid = get_count_grid(value, key);
    else if (key == "k") c.k_grid = get_count_grid(value, key);
    else if (key == "q") c.q_grid = get_count_grid(value, key);
    else if (key == "eps") c.eps_grid = get_real_grid(value, key);
    else if (key == "eta") c.eta_grid = get_real_grid(value, key);
    else if (key == "trials") c.trials = get_count(value, key);
    else if (key == "enumeration_budget") c.enumeration_budget = get_u64(value, key);
    else if (key == "support_trials") c.support_trials = get_count(value, key);
    else if (key == "exhaustive") c.exhaustive = get_bool(value, key);
    else if (key == "target_success") c.target_success = get_real(value, key);
    else if (key == "resamples") c.resamples = get_count(value, key);
    else if (key == "c_f") c.c_f = get_real(value, key);
    else if (key == "c_q") c.c_q = get_real(value, key);
    else if (key == "sparsity") c.sparsity = get_count(value, key);
    else if (key == "variant") c.variant = get_string(value, key);
    else if (key == "level") c.level = static_cast<int>(get_u64(value, key));
    else if (key == "histogram_bins") c.histogram_bins = get_count(value, key);
    else if (key == "algorithm") c.algorithm = get_string(value, key);
    else if (key == "signal") c.signal = get_string(value, key);
    else if (key == "success_tol") c.success_tol = get_real(value, key);
    else if (key == "max_iters") c.max_iters = get_count(value, key);
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

nlohmann::json canonical_config(const ExperimentConfig& c) {
  return nlohmann::json{{"kind", c.kind},
                        {"unitary", c.unitary},
                        {"N", c.n_grid},
                        {"k", c.k_grid},
                        {"q", c.q_grid},
                        {"eps", c.eps_grid},
                        {"eta", c.eta_grid},
                        {"trials", c.trials},
                        {"seed", c.seed},
                        {"enumeration_budget", c.enumeration_budget},
                        {"support_trials", c.support_trials},
                        {"exhaustive", c.exhaustive},
                        {"target_success", c.target_success},
                        {"resamples", c.resamples},
                        {"c_f", c.c_f},
                        {"c_q", c.c_q},
                        {"sparsity", c.sparsity},
                        {"variant", c.variant},
                        {"level", c.level},
                        {"histogram_bins", c.histogram_bins},
                        {"algorithm", c.algorithm},
                        {"signal", c.signal},
                        {"success_tol", c.success_tol},
                        {"max_iters", c.max_iters}};
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string bytes = canonical_config(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string csv_preamble(const ExperimentConfig& c, const std::string& hash) {
  std::string out = "# ripsample ";
  out += c.kind;
  out += " schema=";
  out += std::to_string(kSchemaVersion);
  out += " rng=";
  out += kRngAlgorithm;
  out += " seed=";
  out += std::to_string(c.seed);
  out += " config=";
  out += hash;
  out += '\n';
  return out;
}

nlohmann::json json_envelope(const ExperimentConfig& c, const std::string& hash) {
  return nlohmann::json{{"schema", kSchemaVersion},
                        {"kind", c.kind},
                        {"rng", std::string(kRngAlgorithm)},
                        {"seed", c.seed},
                        {"config_hash", hash},
                        {"config", canonical_config(c)}};
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// k distinct indices in [0, n), ascending.
std::vector<std::size_t> random_support(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> support(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(pool[i], pool[j]);
    support[i] = pool[i];
  }
  std::sort(support.begin(), support.end());
  return support;
}

// Random k-sparse complex vector normalized to ||x||_1 = 1.
ComplexVector sparse_unit_l1(std::size_t n, std::size_t k, Rng& rng) {
  ComplexVector x(n, Complex(0.0));
  const std::vector<std::size_t> support = random_support(n, k, rng);
  double mass = 0.0;
  while (mass == 0.0) {
    for (std::size_t j : support) {
      x[j] = rng.complex_normal();
      mass += std::abs(x[j]);
    }
  }
  for (std::size_t j : support) x[j] /= mass;
  return x;
}

std::size_t calibrated_row_count(std::size_t n, double eps, double eta, double c_q) {
  const double l2n = std::log2(static_cast<double>(n));
  const double l2eta = std::log2(1.0 / eta);
  const double q = std::ceil(c_q * std::pow(eps, -3.0) * (1.0 / eta) * l2n * l2eta * l2eta);
  return static_cast<std::size_t>(std::max(1.0, q));
}

RowSample sample_or_full(std::size_t n, std::size_t q, std::uint64_t seed) {
  return q == n ? full_sample(n) : sample_rows(n, q, seed);
}

}  // namespace

// ---------------------------------------------------------------------------
// rip-exact

std::string run_rip_exact(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);

  struct Cell {
    std::size_t n, k, q, trial;
    std::uint64_t sample_seed = 0;
    RipEstimate estimate;
  };
  std::vector<Cell> cells;
  for (std::size_t n : c.n_grid) {
    for (std::size_t k : c.k_grid) {
      // Refuse infeasible enumeration up front, before any work runs.
      if (binomial_capped(n, k, c.enumeration_budget) > c.enumeration_budget) {
        throw ConfigError("C(" + std::to_string(n) + ", " + std::to_string(k) +
                          ") exceeds enumeration_budget = " +
                          std::to_string(c.enumeration_budget) +
                          "; lower k/N or raise the budget");
      }
      for (std::size_t q : c.q_grid) {
        for (std::size_t t = 0; t < c.trials; ++t) {
          Cell cell;
          cell.n = n;
          cell.k = k;
          cell.q = q;
          cell.trial = t;
          cell.sample_seed = fold_seed(c.seed, {0xE8A1, n, k, q, t});
          cells.push_back(cell);
        }
      }
    }
  }

  const UnitaryKind kind = unitary_kind_from_string(c.unitary);
  RipOptions options;
  options.enumeration_budget = c.enumeration_budget;
  options.threads = 1;
  parallel_for(cells.size(), c.threads, [&](std::size_t i) {
    Cell& cell = cells[i];
    const ImplicitUnitary m = make_unitary(kind, cell.n);
    const PartialOperator a(m, sample_or_full(cell.n, cell.q, cell.sample_seed));
    cell.estimate = rip_constant_exact(a, cell.k, options);
  });

  if (c.format == OutputFormat::Csv) {
    std::string out = csv_preamble(c, hash);
    out += "N,k,q,unitary,mode,delta,supports_examined,witness,sample_seed,seed,config\n";
    for (const Cell& cell : cells) {
      out += std::to_string(cell.n) + ',' + std::to_string(cell.k) + ',' +
             std::to_string(cell.q) + ',' + c.unitary + ',' +
             to_string(cell.estimate.mode) + ',' + fmt(cell.estimate.value) + ',' +
             std::to_string(cell.estimate.supports_examined) + ',' +
             join_indices(cell.estimate.witness) + ',' +
             std::to_string(cell.sample_seed) + ',' + std::to_string(c.seed) + ',' +
             hash + '\n';
    }
    return out;
  }
  nlohmann::json j = json_envelope(c, hash);
  j["results"] = nlohmann::json::array();
  for (const Cell& cell : cells) {
    j["results"].push_back({{"N", cell.n},
                            {"k", cell.k},
                            {"q", cell.q},
                            {"unitary", c.unitary},
                            {"mode", to_string(cell.estimate.mode)},
                            {"delta", cell.estimate.value},
                            {"supports_examined", cell.estimate.supports_examined},
                            {"witness", cell.estimate.witness},
                            {"sample_seed", cell.sample_seed}});
  }
  return dump_json(j);
}

// ---------------------------------------------------------------------------
// rip-scaling

namespace {

struct ScalingCell {
  std::size_t n = 0, k = 0;
  double eps = 0.0;
  std::size_t q_star = 0;
  double success_rate = 0.0;
  bool saturated = false;
  bool exhaustive = false;
};

double scaling_probe(const ExperimentConfig& c, const UnitaryKind kind,
                     const ScalingCell& cell, std::size_t q,
                     std::map<std::size_t, double>& memo) {
  const auto found = memo.find(q);
  if (found != memo.end()) return found->second;
  const ImplicitUnitary m = make_unitary(kind, cell.n);
  std::size_t passes = 0;
  for (std::size_t ridx = 0; ridx < c.resamples; ++ridx) {
    const std::uint64_t seed =
        fold_seed(c.seed, {0x5CA1, cell.n, cell.k, double_bits(cell.eps), q, ridx});
    const PartialOperator a(m, sample_rows(cell.n, q, seed));
    double delta;
    if (cell.exhaustive) {
      RipOptions options;
      options.enumeration_budget = c.enumeration_budget;
      delta = rip_constant_exact(a, cell.k, options).value;
    } else {
      delta = rip_lower_bound(a, cell.k, c.support_trials, fold_seed(seed, {1})).value;
    }
    if (delta <= cell.eps) ++passes;
  }
  const double rate = static_cast<double>(passes) / static_cast<double>(c.resamples);
  memo[q] = rate;
  return rate;
}

}  // namespace

std::string run_rip_scaling(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);
  const UnitaryKind kind = unitary_kind_from_string(c.unitary);

  std::vector<ScalingCell> cells;
  for (std::size_t n : c.n_grid) {
    for (std::size_t k : c.k_grid) {
      const bool feasible =
          binomial_capped(n, k, c.enumeration_budget) <= c.enumeration_budget;
      if (c.exhaustive && !feasible) {
        throw ConfigError("exhaustive rip-scaling at C(" + std::to_string(n) + ", " +
                          std::to_string(k) + ") exceeds enumeration_budget; use the "
                          "random-support surrogate or shrink the grid");
      }
      for (double eps : c.eps_grid) {
        ScalingCell cell;
        cell.n = n;
        cell.k = k;
        cell.eps = eps;
        // Exact constants whenever the support enumeration fits the budget;
        // the random-support surrogate only where it does not.
        cell.exhaustive = feasible;
        cells.push_back(cell);
      }
    }
  }

  parallel_for(cells.size(), c.threads, [&](std::size_t i) {
    ScalingCell& cell = cells[i];
    const std::size_t cap = 64 * cell.n;
    std::map<std::size_t, double> memo;
    auto probe = [&](std::size_t q) { return scaling_probe(c, kind, cell, q, memo); };

    // Bracket by doubling from q = k, then bisect to +-max(1, hi/32).
    std::size_t lo = cell.k;
    std::size_t hi = cell.k;
    double rate = probe(hi);
    while (rate < c.target_success && hi < cap) {
      lo = hi;
      hi = std::min(2 * hi, cap);
      rate = probe(hi);
    }
    if (rate < c.target_success) {
      cell.saturated = true;
      cell.q_star = cap;
      cell.success_rate = rate;
      return;
    }
    if (hi > lo) {
      while (hi - lo > std::max<std::size_t>(1, hi / 32)) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (probe(mid) >= c.target_success) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
    }
    cell.q_star = hi;
    cell.success_rate = memo.at(hi);
  });

  if (c.format == OutputFormat::Csv) {
    std::string out = csv_preamble(c, hash);
    out += "N,k,eps,q_star,success_rate,saturated,mode,support_trials,resamples,seed,config\n";
    for (const ScalingCell& cell : cells) {
      out += std::to_string(cell.n) + ',' + std::to_string(cell.k) + ',' + fmt(cell.eps) +
             ',' + std::to_string(cell.q_star) + ',' + fmt(cell.success_rate) + ',' +
             (cell.saturated ? "1" : "0") + ',' +
             (cell.exhaustive ? "exhaustive" : "random-supports") + ',' +
             std::to_string(c.support_trials) + ',' + std::to_string(c.resamples) + ',' +
             std::to_string(c.seed) + ',' + hash + '\n';
    }
    return out;
  }
  nlohmann::json j = json_envelope(c, hash);
  j["results"] = nlohmann::json::array();
  for (const ScalingCell& cell : cells) {
    j["results"].push_back({{"N", cell.n},
                            {"k", cell.k},
                            {"eps", cell.eps},
                            {"q_star", cell.q_star},
                            {"success_rate", cell.success_rate},
                            {"saturated", cell.saturated},
                            {"mode", cell.exhaustive ? "exhaustive" : "random-supports"},
                            {"support_trials", c.support_trials},
                            {"resamples", c.resamples}});
  }
  return dump_json(j);
}

// ---------------------------------------------------------------------------
// maurey-verify

namespace {

struct MaureyTrial {
  nlohmann::json detail;
  bool good_g_capped = false;
  bool good_g_telescoped = false;
  bool capped_pass = false;
  bool telescoped_pass = false;
  bool final_pass = false;
};

MaureyTrial run_maurey_trial(const ExperimentConfig& c, const ImplicitUnitary& m,
                             std::size_t n, std::size_t q, double eps, double eta,
                             std::size_t cell_index, std::size_t trial) {
  Rng rng(fold_seed(c.seed, {0x3A07, cell_index, trial}));
  const ComplexVector x = sparse_unit_l1(n, c.sparsity, rng);
  const RowSample sample = sample_or_full(n, q, rng.next_u64());
  const PartialOperator op(m, sample);
  const double flat = m.flatness();

  MaureyTrial out;
  out.detail["trial"] = trial;

  auto run_variant = [&](const NetParams& params, bool capped) {
    const int first = capped ? params.r + 1 : 1;
    const int last = params.r + params.t;
    std::vector<ComplexVector> levels;
    nlohmann::json level_log = nlohmann::json::array();
    bool all_ok = true;
    for (int lev = first; lev <= last; ++lev) {
      GoodGResult res = find_good_g(m, x, sample, lev, params, rng);
      all_ok &= res.ok;
      level_log.push_back({{"level", lev},
                           {"attempts", res.attempts},
                           {"ok", res.ok},
                           {"violation_fraction_ambient", res.violation_fraction_ambient},
                           {"violation_fraction_sample", res.violation_fraction_sample}});
      for (Complex& v : res.g) v /= flat;
      levels.push_back(std::move(res.g));
    }
    const NetFamily family = capped ? build_capped_family(std::move(levels), params)
                                    : build_telescoped_family(std::move(levels), params);
    const DecompositionReport report = verify_decomposition(m, x, sample, family);
    nlohmann::json entry;
    entry["levels"] = std::move(level_log);
    entry["good_g_ok"] = all_ok;
    entry["report"] = report;
    out.detail[capped ? "capped" : "telescoped"] = std::move(entry);
    if (capped) {
      out.good_g_capped = all_ok;
      out.capped_pass = report.all_pass;
    } else {
      out.good_g_telescoped = all_ok;
      out.telescoped_pass = report.all_pass;
    }
  };
  run_variant(NetParams::capped(eps, eta, c.c_f), true);
  run_variant(NetParams::telescoped(eps, eta, c.c_f), false);

  // Headline comparison: the sampled mean of |(Mx)_j|^2 over Q against the
  // population mean over [N], within (eps, eta * ||x||_1^2 * flatness^2).
  const double lhs = sampled_mean(op, x);
  const double rhs = full_mean(m, x);
  const double alpha = eta * flat * flat;  // ||x||_1 = 1 by construction
  out.final_pass = approx_within(lhs, rhs, {eps, alpha});
  out.detail["final"] = {{"sample_mean", lhs},
                         {"population_mean", rhs},
                         {"eps", eps},
                         {"alpha", alpha},
                         {"pass", out.final_pass}};
  return out;
}

}  // namespace

std::string run_maurey_verify(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);
  const UnitaryKind kind = unitary_kind_from_string(c.unitary);

  struct CellSpec {
    std::size_t n, q;
    double eps, eta;
  };
  std::vector<CellSpec> specs;
  for (std::size_t n : c.n_grid) {
    for (double eps : c.eps_grid) {
      for (double eta : c.eta_grid) {
        if (c.q_grid.empty()) {
          specs.push_back({n, calibrated_row_count(n, eps, eta, c.c_q), eps, eta});
        } else {
          for (std::size_t q : c.q_grid) specs.push_back({n, q, eps, eta});
        }
      }
    }
  }

  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t ci = 0; ci < specs.size(); ++ci) {
    const CellSpec& spec = specs[ci];
    const ImplicitUnitary m = make_unitary(kind, spec.n);
    std::vector<MaureyTrial> trials(c.trials);
    parallel_for(c.trials, c.threads, [&](std::size_t t) {
      trials[t] = run_maurey_trial(c, m, spec.n, spec.q, spec.eps, spec.eta, ci, t);
    });

    std::size_t good_c = 0, good_t = 0, pass_c = 0, pass_t = 0, pass_final = 0;
    nlohmann::json detail = nlohmann::json::array();
    for (MaureyTrial& trial : trials) {
      good_c += trial.good_g_capped;
      good_t += trial.good_g_telescoped;
      pass_c += trial.capped_pass;
      pass_t += trial.telescoped_pass;
      pass_final += trial.final_pass;
      detail.push_back(std::move(trial.detail));
    }
    const double nt = static_cast<double>(c.trials);
    cells.push_back({{"N", spec.n},
                     {"q", spec.q},
                     {"eps", spec.eps},
                     {"eta", spec.eta},
                     {"trials", c.trials},
                     {"good_g_rate_capped", good_c / nt},
                     {"good_g_rate_telescoped", good_t / nt},
                     {"pass_rate_capped", pass_c / nt},
                     {"pass_rate_telescoped", pass_t / nt},
                     {"final_pass_count", pass_final},
                     {"final_pass_rate", pass_final / nt},
                     {"trials_detail", std::move(detail)}});
  }

  if (c.format == OutputFormat::Csv) {
    std::string out = csv_preamble(c, hash);
    out += "N,q,eps,eta,trials,good_g_rate_capped,good_g_rate_telescoped,"
           "pass_rate_capped,pass_rate_telescoped,final_pass_rate,seed,config\n";
    for (const auto& cell : cells) {
      out += std::to_string(cell["N"].get<std::size_t>()) + ',' +
             std::to_string(cell["q"].get<std::size_t>()) + ',' +
             fmt(cell["eps"].get<double>()) + ',' + fmt(cell["eta"].get<double>()) + ',' +
             std::to_string(cell["trials"].get<std::size_t>()) + ',' +
             fmt(cell["good_g_rate_capped"].get<double>()) + ',' +
             fmt(cell["good_g_rate_telescoped"].get<double>()) + ',' +
             fmt(cell["pass_rate_capped"].get<double>()) + ',' +
             fmt(cell["pass_rate_telescoped"].get<double>()) + ',' +
             fmt(cell["final_pass_rate"].get<double>()) + ',' + std::to_string(c.seed) +
             ',' + hash + '\n';
    }
    return out;
  }
  nlohmann::json j = json_envelope(c, hash);
  j["cells"] = std::move(cells);
  return dump_json(j);
}

// ---------------------------------------------------------------------------
// tail-probe

namespace {

struct ProbeCase {
  const char* name;
  BoundedDistribution dist;
  ApproxSpec spec;
};

std::vector<ProbeCase> canonical_probe_cases() {
  std::vector<ProbeCase> cases;
  {
    BoundedDistribution d;
    d.kind = BoundedKind::Bernoulli;
    d.a = 1.0;
    d.p = 0.5;
    cases.push_back({"nonneg-relative", d, {0.05, 0.0}});
    cases.push_back({"nonneg-relative-additive", d, {0.03, 0.01}});
  }
  {
    BoundedDistribution d;
    d.kind = BoundedKind::Rademacher;
    d.a = 1.0;
    // Band eps' * E|X| + alpha with eps' = 0.04, alpha = 0.01.
    cases.push_back({"signed-absmean-additive", d, {0.0, 0.04 * d.abs_mean() + 0.01}});
  }
  {
    BoundedDistribution d;
    d.kind = BoundedKind::UniformReal;
    d.lo = -1.0;
    d.hi = 1.0;
    cases.push_back({"signed-additive", d, {0.0, 0.03}});
  }
  {
    BoundedDistribution d;
    d.kind = BoundedKind::UnitPhase;
    d.a = 1.0;
    cases.push_back({"complex-modulus", d, {0.0, 0.05}});
  }
  return cases;
}

}  // namespace

std::string run_tail_probe(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);
  const std::vector<ProbeCase> cases = canonical_probe_cases();

  struct Row {
    std::size_t case_index, n_vars;
    double failure_rate = 0.0;
  };
  std::vector<Row> rows;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    for (std::size_t nv : c.n_grid) rows.push_back({ci, nv, 0.0});
  }
  parallel_for(rows.size(), c.threads, [&](std::size_t i) {
    Row& row = rows[i];
    const ProbeCase& pc = cases[row.case_index];
    Rng rng(fold_seed(c.seed, {0x7A17, row.case_index, row.n_vars}));
    row.failure_rate = tail_probe(pc.dist, row.n_vars, pc.spec, c.trials, rng);
  });

  if (c.format == OutputFormat::Csv) {
    std::string out = csv_preamble(c, hash);
    out += "case,distribution,n_vars,trials,eps,alpha,failures,failure_rate,seed,config\n";
    for (const Row& row : rows) {
      const ProbeCase& pc = cases[row.case_index];
      const long long failures = std::llround(row.failure_rate * static_cast<double>(c.trials));
      out += std::string(pc.name) + ',' + to_string(pc.dist.kind) + ',' +
             std::to_string(row.n_vars) + ',' + std::to_string(c.trials) + ',' +
             fmt(pc.spec.eps) + ',' + fmt(pc.spec.alpha) + ',' + std::to_string(failures) +
             ',' + fmt(row.failure_rate) + ',' + std::to_string(c.seed) + ',' + hash + '\n';
    }
    return out;
  }
  nlohmann::json j = json_envelope(c, hash);
  j["results"] = nlohmann::json::array();
  for (const Row& row : rows) {
    const ProbeCase& pc = cases[row.case_index];
    j["results"].push_back({{"case", pc.name},
                            {"distribution", to_string(pc.dist.kind)},
                            {"n_vars", row.n_vars},
                            {"trials", c.trials},
                            {"eps", pc.spec.eps},
                            {"alpha", pc.spec.alpha},
                            {"failure_rate", row.failure_rate}});
  }
  return dump_json(j);
}

// ---------------------------------------------------------------------------
// recovery-phase

std::string run_recovery_phase(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);
  const UnitaryKind kind = unitary_kind_from_string(c.unitary);

  std::vector<std::string> algorithms;
  if (c.algorithm == "both") {
    algorithms = {"iht", "omp"};
  } else {
    algorithms = {c.algorithm};
  }

  struct Cell {
    std::size_t n, k, q, alg;
  };
  std::vector<Cell> cells;
  for (std::size_t n : c.n_grid) {
    for (std::size_t k : c.k_grid) {
      for (std::size_t q : c.q_grid) {
        for (std::size_t alg = 0; alg < algorithms.size(); ++alg) {
          cells.push_back({n, k, q, alg});
        }
      }
    }
  }

  struct Task {
    std::size_t cell, trial;
    bool success = false;
    std::size_t iterations = 0;
  };
  std::vector<Task> tasks;
  tasks.reserve(cells.size() * c.trials);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (std::size_t t = 0; t < c.trials; ++t) tasks.push_back({ci, t});
  }

  parallel_for(tasks.size(), c.threads, [&](std::size_t ti) {
    Task& task = tasks[ti];
    const Cell& cell = cells[task.cell];
    const std::string& alg = algorithms[cell.alg];
    Rng rng(fold_seed(c.seed, {0x8EC0, cell.n, cell.k, cell.q, cell.alg, task.trial}));

    ComplexVector x(cell.n, Complex(0.0));
    for (std::size_t j : random_support(cell.n, cell.k, rng)) {
      if (c.signal == "rademacher") {
        x[j] = Complex((rng.next_u64() & 1) ? 1.0 : -1.0, 0.0);
      } else {
        x[j] = rng.complex_normal();
      }
    }

    const ImplicitUnitary m = make_unitary(kind, cell.n);
    const PartialOperator a(m, sample_or_full(cell.n, cell.q, rng.next_u64()));
    const ComplexVector y = a.apply(x);
    const RecoveryResult res = alg == "iht" ? iht(a, y, cell.k, c.max_iters, 1e-14)
                                            : omp(a, y, cell.k, 1e-14);

    double err = 0.0;
    for (std::size_t j = 0; j < cell.n; ++j) err += std::norm(res.estimate[j] - x[j]);
    const double ref = norm2_squared(x);
    task.success = ref > 0.0 && std::sqrt(err / ref) <= c.success_tol;
    task.iterations = res.iterations;
  });

  struct Agg {
    std::size_t successes = 0;
    std::size_t iteration_sum = 0;
  };
  std::vector<Agg> agg(cells.size());
  for (const Task& task : tasks) {
    agg[task.cell].successes += task.success;
    agg[task.cell].iteration_sum += task.iterations;
  }

  if (c.format == OutputFormat::Csv) {
    std::string out = csv_preamble(c, hash);
    out += "N,k,q,algorithm,signal,trials,successes,success_rate,mean_iterations,seed,config\n";
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const Cell& cell = cells[ci];
      const double nt = static_cast<double>(c.trials);
      out += std::to_string(cell.n) + ',' + std::to_string(cell.k) + ',' +
             std::to_string(cell.q) + ',' + algorithms[cell.alg] + ',' + c.signal + ',' +
             std::to_string(c.trials) + ',' + std::to_string(agg[ci].successes) + ',' +
             fmt(agg[ci].successes / nt) + ',' + fmt(agg[ci].iteration_sum / nt) + ',' +
             std::to_string(c.seed) + ',' + hash + '\n';
    }
    return out;
  }
  nlohmann::json j = json_envelope(c, hash);
  j["results"] = nlohmann::json::array();
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const Cell& cell = cells[ci];
    const double nt = static_cast<double>(c.trials);
    j["results"].push_back({{"N", cell.n},
                            {"k", cell.k},
                            {"q", cell.q},
                            {"algorithm", algorithms[cell.alg]},
                            {"signal", c.signal},
                            {"trials", c.trials},
                            {"successes", agg[ci].successes},
                            {"success_rate", agg[ci].successes / nt},
                            {"mean_iterations", agg[ci].iteration_sum / nt}});
  }
  return dump_json(j);
}

// ---------------------------------------------------------------------------
// g-hist

std::string run_g_hist(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);
  const UnitaryKind kind = unitary_kind_from_string(c.unitary);
  const double hist_max = std::sqrt(2.0);  // |g|/flatness <= sqrt(2) always

  struct Cell {
    std::size_t n;
    double eps, eta;
    std::vector<int> levels;
    // counts[level_index][bin]
    std::vector<std::vector<std::uint64_t>> counts;
  };
  std::vector<Cell> cells;
  for (std::size_t n : c.n_grid) {
    for (double eps : c.eps_grid) {
      for (double eta : c.eta_grid) {
        const NetParams params = c.variant == "capped"
                                     ? NetParams::capped(eps, eta, c.c_f)
                                     : NetParams::telescoped(eps, eta, c.c_f);
        Cell cell;
        cell.n = n;
        cell.eps = eps;
        cell.eta = eta;
        if (c.level == 0) {
          for (int lev = 1; lev <= params.max_level(); ++lev) cell.levels.push_back(lev);
        } else {
          if (c.level > params.max_level()) {
            throw ConfigError("level " + std::to_string(c.level) + " exceeds t+r = " +
                              std::to_string(params.max_level()) + " for eps=" + fmt(eps) +
                              ", eta=" + fmt(eta));
          }
          cell.levels.push_back(c.level);
        }
        cell.counts.assign(cell.levels.size(),
                           std::vector<std::uint64_t>(c.histogram_bins, 0));
        cells.push_back(std::move(cell));
      }
    }
  }

  parallel_for(cells.size(), c.threads, [&](std::size_t ci) {
    Cell& cell = cells[ci];
    const ImplicitUnitary m = make_unitary(kind, cell.n);
    const double flat = m.flatness();
    const NetParams params = c.variant == "capped"
                                 ? NetParams::capped(cell.eps, cell.eta, c.c_f)
                                 : NetParams::telescoped(cell.eps, cell.eta, c.c_f);
    for (std::size_t t = 0; t < c.trials; ++t) {
      Rng rng(fold_seed(c.seed, {0x617, ci, t}));
      const ComplexVector x = sparse_unit_l1(cell.n, c.sparsity, rng);
      const PhaseDistribution d = phase_decompose(x);
      for (std::size_t li = 0; li < cell.levels.size(); ++li) {
        const ComplexVector g = sample_g(m, d, cell.levels[li], params, rng);
        for (const Complex& v : g) {
          const double mag = std::abs(v) / flat;
          std::size_t bin = static_cast<std::size_t>(
              mag / hist_max * static_cast<double>(c.histogram_bins));
          bin = std::min(bin, c.histogram_bins - 1);
          ++cell.counts[li][bin];
        }
      }
    }
  });

  if (c.format == OutputFormat::Csv) {
    std::string out = csv_preamble(c, hash);
    out += "N,eps,eta,variant,level,bin,bin_lo,bin_hi,count,total,seed,config\n";
    for (const Cell& cell : cells) {
      const std::uint64_t total =
          static_cast<std::uint64_t>(cell.n) * static_cast<std::uint64_t>(c.trials);
      for (std::size_t li = 0; li < cell.levels.size(); ++li) {
        for (std::size_t b = 0; b < c.histogram_bins; ++b) {
          const double lo = hist_max * static_cast<double>(b) /
                            static_cast<double>(c.histogram_bins);
          const double hi = hist_max * static_cast<double>(b + 1) /
                            static_cast<double>(c.histogram_bins);
          out += std::to_string(cell.n) + ',' + fmt(cell.eps) + ',' + fmt(cell.eta) + ',' +
                 c.variant + ',' + std::to_string(cell.levels[li]) + ',' +
                 std::to_string(b) + ',' + fmt(lo) + ',' + fmt(hi) + ',' +
                 std::to_string(cell.counts[li][b]) + ',' + std::to_string(total) + ',' +
                 std::to_string(c.seed) + ',' + hash + '\n';
        }
      }
    }
    return out;
  }
  nlohmann::json j = json_envelope(c, hash);
  j["results"] = nlohmann::json::array();
  for (const Cell& cell : cells) {
    for (std::size_t li = 0; li < cell.levels.size(); ++li) {
      j["results"].push_back({{"N", cell.n},
                              {"eps", cell.eps},
                              {"eta", cell.eta},
                              {"variant", c.variant},
                              {"level", cell.levels[li]},
                              {"bin_width", hist_max / static_cast<double>(c.histogram_bins)},
                              {"counts", cell.counts[li]}});
    }
  }
  return dump_json(j);
}

std::string run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  if (c.kind == "rip-exact") return run_rip_exact(c);
  if (c.kind == "rip-scaling") return run_rip_scaling(c);
  if (c.kind == "maurey-verify") return run_maurey_verify(c);
  if (c.kind == "tail-probe") return run_tail_probe(c);
  if (c.kind == "recovery-phase") return run_recovery_phase(c);
  return run_g_hist(c);
}

}  // namespace ripsample
