#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asyvrsc/records.hpp"

namespace asyvrsc {

struct SpeedupEntry {
  std::size_t workers = 0;
  std::optional<double> seconds;         ///< time of the first record at or below the target
  std::optional<std::size_t> iterations;  ///< global iteration of that record
  std::optional<double> time_speedup;     ///< time_1 / time_W
  std::optional<double> iteration_speedup;  ///< (iters_1 / iters_W) * W
};

struct SpeedupReport {
  double target_gap = 0.0;
  std::vector<SpeedupEntry> entries;  ///< ascending worker count
};

/// First record with gap <= target, if any.
std::optional<RunRecord> first_reaching(const std::vector<RunRecord>& records, double target_gap);

/// Cells that never reach the target (DNF), or every cell when the baseline
/// does not, get empty speedups. Throws when runs has no W = 1 entry.
SpeedupReport compute_speedup(const std::map<std::size_t, std::vector<RunRecord>>& runs, double target_gap);

struct ReferenceOptions {
  double tolerance = 1e-12;   ///< stop once ||grad f|| <= tolerance
  double acceptance = 1e-10;  ///< largest gradient norm accepted as a reference
  std::size_t max_iterations = 200000;
};

struct ReferenceResult {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

/// Deterministic full-gradient descent with Barzilai-Borwein trial steps and
/// Armijo backtracking. Throws std::runtime_error if the final gradient norm
/// exceeds options.acceptance.
ReferenceResult reference_minimizer(const CompositionProblem& problem, const Vector& x0,
                                    const ReferenceOptions& options = {});

/// Flat `key = value` text; `#` starts a comment.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::vector<std::string> list(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }
  /// Throws on keys no consumer reads.
  void check_known_keys() const;

 private:
  std::map<std::string, std::string> values_;
};

struct CellSummary {
  std::string engine;
  std::size_t workers = 0;
  std::filesystem::path csv;
  bool reached_target = false;
  double final_gap = 0.0;
  std::size_t records = 0;
};

struct ExperimentSummary {
  std::filesystem::path directory;
  double reference_value = 0.0;
  double reference_gradient_norm = 0.0;
  std::vector<CellSummary> cells;
};

/// Generates the instance, solves for the reference value, runs every
/// engine x worker-count cell and writes `<engine>_W<k>.csv` files plus
/// `manifest.json` into `directory`.
ExperimentSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& directory);

}  // namespace asyvrsc
