#include "asyvrsc/problem.hpp"

#include <algorithm>
#include <cmath>

namespace asyvrsc {

std::vector<IndexRange> split_evenly(std::size_t n, std::size_t parts) {
  if (parts == 0) throw std::invalid_argument("split_evenly: need at least one part");
  std::vector<IndexRange> blocks;
  blocks.reserve(parts);
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < parts; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    blocks.push_back({begin, begin + len});
    begin += len;
  }
  return blocks;
}

double SparsityProfile::delta() const { return std::max({delta_F, delta_G, delta_f}); }

void HyperparameterConstants::validate(std::size_t d1, std::size_t d2) const {
  const std::pair<const char*, double> fields[] = {{"mu_f", mu_f}, {"L_F", L_F}, {"L_G", L_G},
                                                   {"L_f", L_f},   {"B_F", B_F}, {"B_G", B_G},
                                                   {"delta", delta}, {"T", T}};
  for (const auto& [name, value] : fields) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw std::invalid_argument(std::string("hyperparameter constant ") + name +
                                  " must be positive and finite");
    }
  }
  if (delta > 1.0) throw std::invalid_argument("sparsity ratio delta must be <= 1");
  if (d1 > 0 && d2 > 0 && delta < 1.0 / (static_cast<double>(d1) * static_cast<double>(d2))) {
    throw std::invalid_argument("sparsity ratio delta must be >= 1/(d1*d2)");
  }
}

void require_parameter_length(const CompositionProblem& problem, const Vector& x) {
  const auto d1 = problem.dimensions().d1;
  if (static_cast<std::size_t>(x.size()) != d1) {
    throw DimensionError("parameter vector has length " + std::to_string(x.size()) +
                         ", expected d1 = " + std::to_string(d1));
  }
}

void CompositionProblem::check_inner(std::size_t j, const Vector& x) const {
  const auto dims = dimensions();
  if (j >= dims.n2) {
    throw std::out_of_range("inner index " + std::to_string(j) + " out of range [0, " +
                            std::to_string(dims.n2) + ")");
  }
  require_parameter_length(*this, x);
}

void CompositionProblem::check_outer(std::size_t i, const Vector& y) const {
  const auto dims = dimensions();
  if (i >= dims.n1) {
    throw std::out_of_range("outer index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(dims.n1) + ")");
  }
  if (static_cast<std::size_t>(y.size()) != dims.d2) {
    throw DimensionError("inner value has length " + std::to_string(y.size()) +
                         ", expected d2 = " + std::to_string(dims.d2));
  }
}

Vector CompositionProblem::inner_value(std::size_t j, const Vector& x) const {
  check_inner(j, x);
  return do_inner_value(j, x);
}

Jacobian CompositionProblem::inner_jacobian(std::size_t j, const Vector& x) const {
  check_inner(j, x);
  return do_inner_jacobian(j, x);
}

double CompositionProblem::outer_value(std::size_t i, const Vector& y) const {
  check_outer(i, y);
  return do_outer_value(i, y);
}

Vector CompositionProblem::outer_gradient(std::size_t i, const Vector& y) const {
  check_outer(i, y);
  return do_outer_gradient(i, y);
}

Vector sum_inner_values(const CompositionProblem& problem, const Vector& x, IndexRange block) {
  const auto dims = problem.dimensions();
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(dims.d2));
  for (std::size_t j = block.begin; j < block.end; ++j) sum += problem.inner_value(j, x);
  return sum;
}

RowMatrix sum_inner_jacobians(const CompositionProblem& problem, const Vector& x, IndexRange block) {
  const auto dims = problem.dimensions();
  RowMatrix sum = RowMatrix::Zero(static_cast<Eigen::Index>(dims.d2), static_cast<Eigen::Index>(dims.d1));
  for (std::size_t j = block.begin; j < block.end; ++j) problem.inner_jacobian(j, x).add_to(sum);
  return sum;
}

Vector sum_outer_gradients(const CompositionProblem& problem, const Vector& inner, IndexRange block) {
  const auto dims = problem.dimensions();
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(dims.d2));
  for (std::size_t i = block.begin; i < block.end; ++i) sum += problem.outer_gradient(i, inner);
  return sum;
}

Vector mean_of_partials(std::span<const Vector> partials, std::size_t count) {
  if (partials.empty()) throw std::invalid_argument("mean_of_partials: no partial sums");
  Vector acc = Vector::Zero(partials.front().size());
  for (const auto& p : partials) {
    if (p.size() != acc.size()) throw DimensionError("mean_of_partials: partial length mismatch");
    acc += p;
  }
  return acc / static_cast<double>(count);
}

RowMatrix mean_of_partials(std::span<const RowMatrix> partials, std::size_t count) {
  if (partials.empty()) throw std::invalid_argument("mean_of_partials: no partial sums");
  RowMatrix acc = RowMatrix::Zero(partials.front().rows(), partials.front().cols());
  for (const auto& p : partials) {
    if (p.rows() != acc.rows() || p.cols() != acc.cols()) {
      throw DimensionError("mean_of_partials: partial shape mismatch");
    }
    acc += p;
  }
  return acc / static_cast<double>(count);
}

Vector composite_gradient(const Jacobian& jacobian, const Vector& outer_grad, const Vector& x,
                          double l2) {
  Vector g;
  jacobian.transpose_multiply(outer_grad, g);
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] += l2 * x[k];
  return g;
}

double evaluate_objective(const CompositionProblem& problem, const Vector& x) {
  const Vector inner = full_inner(problem, x);
  const auto dims = problem.dimensions();
  double sum = 0.0;
  for (std::size_t i = 0; i < dims.n1; ++i) sum += problem.outer_value(i, inner);
  return sum / static_cast<double>(dims.n1) + 0.5 * problem.l2_weight() * x.squaredNorm();
}

Vector full_inner(const CompositionProblem& problem, const Vector& x) {
  require_parameter_length(problem, x);
  const auto dims = problem.dimensions();
  const Vector partial = sum_inner_values(problem, x, {0, dims.n2});
  return mean_of_partials(std::span(&partial, 1), dims.n2);
}

Vector full_gradient(const CompositionProblem& problem, const Vector& x) {
  require_parameter_length(problem, x);
  const auto dims = problem.dimensions();
  const Vector value_sum = sum_inner_values(problem, x, {0, dims.n2});
  const RowMatrix jacobian_sum = sum_inner_jacobians(problem, x, {0, dims.n2});
  const Vector inner = mean_of_partials(std::span(&value_sum, 1), dims.n2);
  const Jacobian jacobian = Jacobian::compact(mean_of_partials(std::span(&jacobian_sum, 1), dims.n2));
  const Vector outer_sum = sum_outer_gradients(problem, inner, {0, dims.n1});
  const Vector outer = mean_of_partials(std::span(&outer_sum, 1), dims.n1);
  return composite_gradient(jacobian, outer, x, problem.l2_weight());
}

double default_difference_step(const Vector& x) {
  const double scale = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  return 1e-5 * std::max(1.0, scale);
}

Vector finite_difference_gradient(const CompositionProblem& problem, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: step h must be > 0");
  require_parameter_length(problem, x);
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double upper = x[k] + h;
    const double lower = x[k] - h;
    probe[k] = upper;
    const double forward = evaluate_objective(problem, probe);
    probe[k] = lower;
    const double backward = evaluate_objective(problem, probe);
    probe[k] = x[k];
    // Divide by the representable span, not 2h.
    grad[k] = (forward - backward) / (upper - lower);
  }
  return grad;
}

Vector finite_difference_gradient(const CompositionProblem& problem, const Vector& x) {
  return finite_difference_gradient(problem, x, default_difference_step(x));
}

}  // namespace asyvrsc
