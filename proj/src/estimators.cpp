#include "asyvrsc/estimators.hpp"

#include <optional>
#include <thread>

namespace asyvrsc {

namespace {

void check_snapshot(const CompositionProblem& problem, const Snapshot& snapshot, const Vector& x) {
  require_parameter_length(problem, x);
  const auto dims = problem.dimensions();
  if (static_cast<std::size_t>(snapshot.x_tilde.size()) != dims.d1 ||
      static_cast<std::size_t>(snapshot.inner_value.size()) != dims.d2 ||
      snapshot.inner_jacobian.rows() != dims.d2 || snapshot.inner_jacobian.cols() != dims.d1) {
    throw DimensionError("snapshot does not match the problem dimensions");
  }
}

void check_indices(std::span<const std::size_t> batch, std::size_t bound, const char* what) {
  for (const auto j : batch) {
    if (j >= bound) {
      throw std::out_of_range(std::string(what) + " index " + std::to_string(j) + " out of range [0, " +
                              std::to_string(bound) + ")");
    }
  }
}

// Estimated inner value, Jacobian and the two outer gradients shared by every
// form of the gradient estimate.
struct Parts {
  Vector g_hat;
  std::optional<Jacobian> owned_jacobian;
  const Jacobian* jac_hat = nullptr;
  Vector outer_at_estimate;  // grad F_i(g_hat)
  Vector outer_at_snapshot;  // grad F_i(G(x~))
};

Parts prepare(const CompositionProblem& problem, const Snapshot& snapshot, const Vector& x,
              const MiniBatch& batch) {
  check_snapshot(problem, snapshot, x);
  batch.validate(problem.dimensions());
  Parts parts;
  parts.g_hat = estimate_inner(problem, snapshot, x, batch.batch_a);
  if (problem.constant_jacobians()) {
    // Every correction term cancels exactly; reuse the snapshot Jacobian.
    parts.jac_hat = &snapshot.inner_jacobian;
  } else {
    parts.owned_jacobian = estimate_jacobian(problem, snapshot, x, batch.batch_b);
    parts.jac_hat = &*parts.owned_jacobian;
  }
  parts.outer_at_estimate = problem.outer_gradient(batch.outer_index, parts.g_hat);
  parts.outer_at_snapshot = problem.outer_gradient(batch.outer_index, snapshot.inner_value);
  return parts;
}

}  // namespace

Vector combine_inner(const CompositionProblem& problem, std::span<const Vector> inner_sums) {
  return mean_of_partials(inner_sums, problem.dimensions().n2);
}

Snapshot finish_snapshot(const CompositionProblem& problem, const Vector& x_tilde, Vector inner,
                         std::span<const RowMatrix> jacobian_sums, std::span<const Vector> outer_sums,
                         std::size_t epoch) {
  const auto dims = problem.dimensions();
  Snapshot snap;
  snap.x_tilde = x_tilde;
  snap.inner_value = std::move(inner);
  snap.inner_jacobian = Jacobian::compact(mean_of_partials(jacobian_sums, dims.n2));
  snap.outer_gradient = mean_of_partials(outer_sums, dims.n1);
  snap.full_grad = composite_gradient(snap.inner_jacobian, snap.outer_gradient, x_tilde, problem.l2_weight());
  snap.epoch = epoch;
  return snap;
}

Snapshot assemble_snapshot(const CompositionProblem& problem, const Vector& x_tilde,
                           std::span<const Vector> inner_sums, std::span<const RowMatrix> jacobian_sums,
                           std::span<const Vector> outer_sums, std::size_t epoch) {
  return finish_snapshot(problem, x_tilde, combine_inner(problem, inner_sums), jacobian_sums, outer_sums,
                         epoch);
}

Snapshot take_snapshot(const CompositionProblem& problem, const Vector& x_tilde, std::size_t blocks,
                       std::size_t epoch) {
  require_parameter_length(problem, x_tilde);
  if (blocks == 0) throw std::invalid_argument("take_snapshot: need at least one block");
  const auto dims = problem.dimensions();
  const auto inner_blocks = split_evenly(dims.n2, blocks);
  const auto outer_blocks = split_evenly(dims.n1, blocks);
  std::vector<Vector> inner_sums(blocks);
  std::vector<RowMatrix> jacobian_sums(blocks);
  std::vector<Vector> outer_sums(blocks);

  const auto run = [&](auto&& body) {
    if (blocks == 1) {
      body(0);
      return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(blocks);
    for (std::size_t k = 0; k < blocks; ++k) pool.emplace_back([&body, k] { body(k); });
  };

  run([&](std::size_t k) {
    inner_sums[k] = sum_inner_values(problem, x_tilde, inner_blocks[k]);
    jacobian_sums[k] = sum_inner_jacobians(problem, x_tilde, inner_blocks[k]);
  });
  Vector inner = combine_inner(problem, inner_sums);
  run([&](std::size_t k) { outer_sums[k] = sum_outer_gradients(problem, inner, outer_blocks[k]); });
  return finish_snapshot(problem, x_tilde, std::move(inner), jacobian_sums, outer_sums, epoch);
}

MiniBatch MiniBatch::sample(Rng& rng, const Dimensions& dims, std::size_t a, std::size_t b) {
  MiniBatch batch;
  batch.batch_a.resize(a);
  batch.batch_b.resize(b);
  for (auto& j : batch.batch_a) j = static_cast<std::size_t>(rng.index(dims.n2));
  for (auto& j : batch.batch_b) j = static_cast<std::size_t>(rng.index(dims.n2));
  batch.outer_index = static_cast<std::size_t>(rng.index(dims.n1));
  return batch;
}

void MiniBatch::validate(const Dimensions& dims) const {
  if (batch_a.empty() || batch_b.empty()) throw std::invalid_argument("mini-batches must be non-empty");
  check_indices(batch_a, dims.n2, "batch_a");
  check_indices(batch_b, dims.n2, "batch_b");
  if (outer_index >= dims.n1) {
    throw std::out_of_range("outer index " + std::to_string(outer_index) + " out of range [0, " +
                            std::to_string(dims.n1) + ")");
  }
}

Vector estimate_inner(const CompositionProblem& problem, const Snapshot& snapshot, const Vector& x,
                      std::span<const std::size_t> batch_a) {
  check_snapshot(problem, snapshot, x);
  if (batch_a.empty()) throw std::invalid_argument("estimate_inner: empty batch");
  check_indices(batch_a, problem.dimensions().n2, "batch_a");
  Vector correction = Vector::Zero(snapshot.inner_value.size());
  for (const auto j : batch_a) {
    correction += problem.inner_value(j, snapshot.x_tilde) - problem.inner_value(j, x);
  }
  return snapshot.inner_value - correction / static_cast<double>(batch_a.size());
}

Jacobian estimate_jacobian(const CompositionProblem& problem, const Snapshot& snapshot, const Vector& x,
                           std::span<const std::size_t> batch_b) {
  check_snapshot(problem, snapshot, x);
  if (batch_b.empty()) throw std::invalid_argument("estimate_jacobian: empty batch");
  check_indices(batch_b, problem.dimensions().n2, "batch_b");
  const auto dims = problem.dimensions();
  RowMatrix correction = RowMatrix::Zero(static_cast<Eigen::Index>(dims.d2), static_cast<Eigen::Index>(dims.d1));
  for (const auto j : batch_b) {
    correction += problem.inner_jacobian(j, snapshot.x_tilde).to_dense() -
                  problem.inner_jacobian(j, x).to_dense();
  }
  RowMatrix estimate = snapshot.inner_jacobian.to_dense() - correction / static_cast<double>(batch_b.size());
  if (snapshot.inner_jacobian.is_sparse() || problem.constant_jacobians()) {
    return Jacobian::compact(estimate);
  }
  return Jacobian::dense(std::move(estimate));
}

void variance_reduced_gradient(const CompositionProblem& problem, const Snapshot& snapshot,
                               const Vector& x, const MiniBatch& batch, Vector& grad) {
  const Parts parts = prepare(problem, snapshot, x, batch);
  Vector at_estimate;
  Vector at_snapshot;
  parts.jac_hat->transpose_multiply(parts.outer_at_estimate, at_estimate);
  snapshot.inner_jacobian.transpose_multiply(parts.outer_at_snapshot, at_snapshot);
  const double l2 = problem.l2_weight();
  grad.resize(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double current = at_estimate[k] + l2 * x[k];
    const double anchor = at_snapshot[k] + l2 * snapshot.x_tilde[k];
    grad[k] = (current - anchor) + snapshot.full_grad[k];
  }
}

void variance_reduced_gradient(const CompositionProblem& problem, const Snapshot& snapshot,
                               const Vector& x, const MiniBatch& batch,
                               std::span<const std::size_t> coords, std::span<double> out) {
  if (coords.size() != out.size()) throw DimensionError("coordinate and output spans differ in length");
  const auto d1 = problem.dimensions().d1;
  for (const auto k : coords) {
    if (k >= d1) throw std::out_of_range("coordinate " + std::to_string(k) + " out of range");
  }
  const Parts parts = prepare(problem, snapshot, x, batch);
  std::vector<double> at_estimate(coords.size());
  std::vector<double> at_snapshot(coords.size());
  parts.jac_hat->transpose_multiply(parts.outer_at_estimate, coords, at_estimate);
  snapshot.inner_jacobian.transpose_multiply(parts.outer_at_snapshot, coords, at_snapshot);
  const double l2 = problem.l2_weight();
  for (std::size_t m = 0; m < coords.size(); ++m) {
    const auto k = static_cast<Eigen::Index>(coords[m]);
    const double current = at_estimate[m] + l2 * x[k];
    const double anchor = at_snapshot[m] + l2 * snapshot.x_tilde[k];
    out[m] = (current - anchor) + snapshot.full_grad[k];
  }
}

CompositeGradientEstimate estimate_gradient(const CompositionProblem& problem, const Snapshot& snapshot,
                                            const Vector& x, const MiniBatch& batch) {
  Parts parts = prepare(problem, snapshot, x, batch);
  CompositeGradientEstimate est;
  variance_reduced_gradient(problem, snapshot, x, batch, est.grad);
  est.g_hat = std::move(parts.g_hat);
  est.jac_hat = parts.owned_jacobian ? std::move(*parts.owned_jacobian) : snapshot.inner_jacobian;
  est.batch = batch;
  return est;
}

std::uint64_t snapshot_queries(const Dimensions& dims) { return dims.n1 + 2 * dims.n2; }

std::uint64_t update_queries(std::size_t a, std::size_t b) { return a + b + 2; }

}  // namespace asyvrsc
