#pragma once

#include <cstdint>
#include <vector>

#include "asyvrsc/estimators.hpp"
#include "asyvrsc/records.hpp"

namespace asyvrsc {

/// Point carried into the next epoch.
enum class EpochAnchor { kLastIterate, kRandomIterate };

struct SolverOptions {
  std::size_t epochs = 10;            ///< S; zero returns the starting point
  std::size_t inner_iterations = 1000;  ///< K
  std::size_t batch_a = 5;
  std::size_t batch_b = 5;
  double learning_rate = 1e-3;
  EpochAnchor anchor = EpochAnchor::kLastIterate;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Index r in [0, K] of the iterate x_r kept as the next anchor. Last-iterate
/// mode always returns K; random mode draws from an epoch-specific stream so
/// every engine picks the same r.
std::size_t anchor_index(const SolverOptions& options, std::size_t epoch);

struct SolveResult {
  Vector x;
  std::vector<RunRecord> trajectory;
  std::uint64_t oracle_queries = 0;
};

/// Sequential variance-reduced compositional gradient method. A trajectory
/// record is taken at the start and after every epoch (plus every
/// monitor.record_every updates); gap evaluation is excluded from the clock.
SolveResult vrsc_solve(const CompositionProblem& problem, const SolverOptions& options, const Vector& x0,
                       const Monitor& monitor = {});

/// Two-timescale schedules eta_t = eta_scale * t^-eta_exponent and
/// beta_t = min(1, beta_scale * t^-beta_exponent), t = 1, 2, ...
struct ScgdOptions {
  std::size_t iterations = 10000;
  std::size_t batch_a = 5;
  std::size_t batch_b = 5;
  double eta_scale = 1e-2;
  double eta_exponent = 0.75;
  double beta_scale = 1.0;
  double beta_exponent = 0.5;
  std::uint64_t seed = 1;
  std::size_t record_every = 0;  ///< 0: about 100 records per run

  void validate() const;
  double eta(std::size_t t) const;
  double beta(std::size_t t) const;
};

struct ScgdResult {
  Vector x;
  Vector tracking;  ///< running estimate y of G(x)
  std::vector<RunRecord> trajectory;
  std::uint64_t oracle_queries = 0;
};

/// Stochastic compositional gradient descent baseline, y_0 = 0:
///   y <- (1 - beta_t) y + beta_t G_A(x)
///   x <- x - eta_t (grad G_B(x)^T grad F_i(y) + l2 x)
/// Charged a + b + 1 oracle queries per iteration.
ScgdResult scgd_solve(const CompositionProblem& problem, const ScgdOptions& options, const Vector& x0,
                      const Monitor& monitor = {});

enum class EngineMode { kShared, kDistributed };

struct Recommendation {
  std::size_t batch_a = 0;
  std::size_t batch_b = 0;
  std::size_t inner_iterations = 0;
  double learning_rate = 0.0;
  std::size_t max_delay = 0;
};

/// Theory-driven choices of a, b, K, eta and the admissible delay bound.
/// Distributed mode uses constants.delta for the sparsity ratio.
Recommendation recommend_hyperparameters(const HyperparameterConstants& constants, std::size_t d1,
                                         EngineMode mode);

}  // namespace asyvrsc
