#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qomor/balancing.hpp"
#include "qomor/qbmor.hpp"
#include "qomor/signals.hpp"
#include "qomor/simulate.hpp"

namespace qomor {

/// Parsed experiment description. The "system" node is kept as JSON text:
///   {"file": "sys.json"}                          relative to the config
///   {"generator": "heat1d" | "msd" | "random", ...generator parameters}
///   {"n": .., "m": .., "matrices": {...}}         an inline manifest
struct ExperimentConfig {
  std::string system_json;
  std::filesystem::path base_dir;
  std::vector<Method> methods;
  std::vector<Index> orders;
  /// Retain sigma_k >= threshold * sigma_1 per method instead of `orders`.
  std::optional<double> threshold;
  std::vector<SignalSpec> signals;
  SimulationOptions integrator{};
  std::filesystem::path output_dir = "results";
  std::uint64_t seed = 0;
  QbGramianOptions qbtbt{};
  /// Balanced realizations behind the singular-value error terms keep the
  /// states with sigma_k > balance_floor * sigma_1.
  double balance_floor = 1e-10;
  /// Record wall-clock runtime_ms per cell (otherwise null, keeping the
  /// outputs byte-identical across runs).
  bool timing = false;
};

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = ".");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Builds the system described by config.system_json.
LdqoSystem<double> build_experiment_system(const ExperimentConfig& config);

struct ExperimentResult {
  std::filesystem::path summary_path;
  int cells = 0;
  int failed_cells = 0;
};

/// Runs every (method, order, signal) cell and writes
///   sigma_<method>.csv, traj_<method>_r<order>_s<signal>.csv, summary.json
/// into config.output_dir. Cell failures are recorded in the summary.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Worker count: QOMOR_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
unsigned experiment_threads();

}  // namespace qomor
