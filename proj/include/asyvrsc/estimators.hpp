#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asyvrsc/problem.hpp"
#include "asyvrsc/rng.hpp"

namespace asyvrsc {

/// Exact full-pass quantities frozen at the start of an epoch.
struct Snapshot {
  Vector x_tilde;
  Vector inner_value;      ///< G(x~)
  Jacobian inner_jacobian; ///< grad G(x~)
  Vector outer_gradient;   ///< grad F(G(x~))
  Vector full_grad;        ///< grad G(x~)^T grad F(G(x~)) + l2 x~
  std::size_t epoch = 0;
};

/// Computes the snapshot with `blocks` threads, each summing a contiguous
/// block of samples (split_evenly); partial sums are combined in block
/// order, so the result depends on `blocks` but not on thread timing.
Snapshot take_snapshot(const CompositionProblem& problem, const Vector& x_tilde, std::size_t blocks = 1,
                       std::size_t epoch = 0);

/// Finishes a snapshot from block partial sums (combined in the given order).
Snapshot assemble_snapshot(const CompositionProblem& problem, const Vector& x_tilde,
                           std::span<const Vector> inner_sums, std::span<const RowMatrix> jacobian_sums,
                           std::span<const Vector> outer_sums, std::size_t epoch);
/// The two halves of assemble_snapshot, for callers that must publish G(x~)
/// before the outer sums can be formed.
Vector combine_inner(const CompositionProblem& problem, std::span<const Vector> inner_sums);
Snapshot finish_snapshot(const CompositionProblem& problem, const Vector& x_tilde, Vector inner,
                         std::span<const RowMatrix> jacobian_sums, std::span<const Vector> outer_sums,
                         std::size_t epoch);

/// Index draws for one stochastic update.
struct MiniBatch {
  std::vector<std::size_t> batch_a;  ///< inner-value samples, with replacement
  std::vector<std::size_t> batch_b;  ///< inner-Jacobian samples, with replacement
  std::size_t outer_index = 0;

  /// Draws batch_a, then batch_b, then outer_index from `rng`.
  static MiniBatch sample(Rng& rng, const Dimensions& dims, std::size_t a, std::size_t b);
  void validate(const Dimensions& dims) const;
};

struct CompositeGradientEstimate {
  Vector g_hat;       ///< estimated G(x)
  Jacobian jac_hat;   ///< estimated grad G(x)
  Vector grad;        ///< variance-reduced gradient
  MiniBatch batch;
};

/// G(x~) - (1/a) sum_{j in A} (G_j(x~) - G_j(x))
Vector estimate_inner(const CompositionProblem& problem, const Snapshot& snapshot, const Vector& x,
                      std::span<const std::size_t> batch_a);

/// grad G(x~) - (1/b) sum_{j in B} (grad G_j(x~) - grad G_j(x))
Jacobian estimate_jacobian(const CompositionProblem& problem, const Snapshot& snapshot, const Vector& x,
                           std::span<const std::size_t> batch_b);

/// jac_hat^T grad F_i(g_hat) - grad f_i(x~) + grad f(x~), where
/// grad f_i(x~) = grad G(x~)^T grad F_i(G(x~)); with l2 > 0 each f_i also
/// carries (l2/2)||x||^2.
CompositeGradientEstimate estimate_gradient(const CompositionProblem& problem, const Snapshot& snapshot,
                                            const Vector& x, const MiniBatch& batch);

/// Same gradient as estimate_gradient().grad without materialising the parts.
void variance_reduced_gradient(const CompositionProblem& problem, const Snapshot& snapshot,
                               const Vector& x, const MiniBatch& batch, Vector& grad);

/// Only the coordinates in `coords`; each value is bitwise equal to the
/// corresponding entry of the full gradient.
void variance_reduced_gradient(const CompositionProblem& problem, const Snapshot& snapshot,
                               const Vector& x, const MiniBatch& batch,
                               std::span<const std::size_t> coords, std::span<double> out);

/// Oracle queries charged for one snapshot: n1 + 2 n2.
std::uint64_t snapshot_queries(const Dimensions& dims);
/// Oracle queries charged for one variance-reduced update: a + b + 2.
std::uint64_t update_queries(std::size_t a, std::size_t b);

}  // namespace asyvrsc
