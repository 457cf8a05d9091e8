#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ripsample {

// Raised for malformed or inconsistent experiment configuration; the CLI
// maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, Json };

std::string to_string(OutputFormat format);
OutputFormat output_format_from_string(const std::string& name);

// One experiment = one JSON document. Grid-valued keys (N, k, q, eps, eta)
// accept a scalar or an array. Unknown keys and keys not used by the chosen
// kind are rejected. Missing keys fall back to per-kind defaults sized for
// desk-scale runs (see default_config).
struct ExperimentConfig {
  std::string kind;  // rip-exact | rip-scaling | maurey-verify | tail-probe
                     // | recovery-phase | g-hist

  std::string unitary = "dft";  // dft | hadamard
  std::vector<std::size_t> n_grid;
  std::vector<std::size_t> k_grid;
  std::vector<std::size_t> q_grid;
  std::vector<double> eps_grid;
  std::vector<double> eta_grid;
  std::size_t trials = 0;
  std::uint64_t seed = 1;
  std::string out;  // empty = stdout (CLI only; runners just return bytes)
  OutputFormat format = OutputFormat::Csv;
  int threads = 1;

  // rip-exact / rip-scaling
  std::uint64_t enumeration_budget = 1'000'000;
  std::size_t support_trials = 200;  // random-support delta surrogate
  bool exhaustive = false;           // rip-scaling: exact delta instead
  double target_success = 0.9;       // rip-scaling: required pass fraction
  std::size_t resamples = 400;       // rip-scaling: fresh A draws per probe

  // maurey-verify / g-hist
  double c_f = 8.0;          // sample-size constant
  double c_q = 1.0 / 256.0;  // calibrated row-count constant
  std::size_t sparsity = 4;  // support size of the sampled x
  std::string variant = "telescoped";  // g-hist: capped | telescoped
  int level = 0;                       // g-hist: 0 = all levels
  std::size_t histogram_bins = 32;

  // recovery-phase
  std::string algorithm = "both";      // iht | omp | both
  std::string signal = "rademacher";   // rademacher | gaussian
  double success_tol = 1e-6;           // relative-error success threshold
  std::size_t max_iters = 200;
};

// Baseline config for a kind, with every grid and count at its documented
// desk-scale default.
ExperimentConfig default_config(const std::string& kind);

// Strict parse: starts from default_config(kind), overlays the document,
// validates. Throws ConfigError on unknown keys, type mismatches, or values
// out of range.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);

// Re-checks invariants after programmatic edits (the CLI overrides flags on
// a parsed config and revalidates).
void validate_config(const ExperimentConfig& config);

// Canonical JSON used for hashing and echoed into JSON outputs. Excludes
// out/threads/format, which cannot affect results.
nlohmann::json canonical_config(const ExperimentConfig& config);

// FNV-1a (64-bit, hex) over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& config);

// Runners return the full output document as bytes; identical (config, seed)
// yields identical bytes. The CLI decides where the bytes go.
std::string run_rip_exact(const ExperimentConfig& config);
std::string run_rip_scaling(const ExperimentConfig& config);
std::string run_maurey_verify(const ExperimentConfig& config);
std::string run_tail_probe(const ExperimentConfig& config);
std::string run_recovery_phase(const ExperimentConfig& config);
std::string run_g_hist(const ExperimentConfig& config);

// Dispatch on config.kind.
std::string run_experiment(const ExperimentConfig& config);

}  // namespace ripsample
