#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyvrsc/jacobian.hpp"
#include "asyvrsc/types.hpp"

namespace asyvrsc {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Splits [0, n) into `parts` contiguous blocks whose sizes differ by at
/// most one; the first n % parts blocks carry the extra element.
std::vector<IndexRange> split_evenly(std::size_t n, std::size_t parts);

/// Worst-case fraction of nonzeros in the outer gradients (delta_F), the
/// inner Jacobians (delta_G) and the per-pair gradients
/// grad G_j^T grad F_i (delta_f). delta() is the maximum of the three.
struct SparsityProfile {
  double delta_F = 1.0;
  double delta_G = 1.0;
  double delta_f = 1.0;
  double delta() const;
};

/// Problem constants that drive the step-size and batch-size recipes.
struct HyperparameterConstants {
  double mu_f = 1.0;   ///< strong convexity of f
  double L_F = 1.0;    ///< Lipschitz constant of grad F_i
  double L_G = 1.0;    ///< Lipschitz constant of grad G_j
  double L_f = 1.0;    ///< Lipschitz constant of grad f_ij
  double B_F = 1.0;    ///< bound on ||grad F_i||
  double B_G = 1.0;    ///< bound on ||grad G_j||
  double delta = 1.0;  ///< sparsity ratio
  double T = 1.0;      ///< delay bound

  /// Throws std::invalid_argument unless every constant is positive and
  /// delta <= 1. With nonzero d1, d2 also requires delta >= 1 / (d1 d2).
  void validate(std::size_t d1 = 0, std::size_t d2 = 0) const;
};

/// f(x) = (1/n1) sum_i F_i((1/n2) sum_j G_j(x)) + (l2/2) ||x||^2.
///
/// Implementations override the do_* hooks; the public entry points check
/// indices and lengths first. All members must be safe to call
/// concurrently from many threads.
class CompositionProblem {
 public:
  virtual ~CompositionProblem() = default;

  virtual Dimensions dimensions() const = 0;

  Vector inner_value(std::size_t j, const Vector& x) const;
  Jacobian inner_jacobian(std::size_t j, const Vector& x) const;
  double outer_value(std::size_t i, const Vector& y) const;
  Vector outer_gradient(std::size_t i, const Vector& y) const;

  /// Weight of the (l2/2)||x||^2 term carried by every f_i.
  virtual double l2_weight() const { return 0.0; }
  /// True when every G_j is affine, so its Jacobian does not depend on x.
  virtual bool constant_jacobians() const { return false; }
  /// Structural sparsity. The default claims fully dense gradients.
  virtual SparsityProfile sparsity() const { return {}; }

 protected:
  virtual Vector do_inner_value(std::size_t j, const Vector& x) const = 0;
  virtual Jacobian do_inner_jacobian(std::size_t j, const Vector& x) const = 0;
  virtual double do_outer_value(std::size_t i, const Vector& y) const = 0;
  virtual Vector do_outer_gradient(std::size_t i, const Vector& y) const = 0;

 private:
  void check_inner(std::size_t j, const Vector& x) const;
  void check_outer(std::size_t i, const Vector& y) const;
};

void require_parameter_length(const CompositionProblem& problem, const Vector& x);

/// F(G(x)) plus the l2 term.
double evaluate_objective(const CompositionProblem& problem, const Vector& x);
/// G(x) = (1/n2) sum_j G_j(x).
Vector full_inner(const CompositionProblem& problem, const Vector& x);
/// (grad G(x))^T grad F(G(x)) + l2 x.
Vector full_gradient(const CompositionProblem& problem, const Vector& x);

/// 1e-5 * max(1, ||x||_inf).
double default_difference_step(const Vector& x);
/// Central differences of evaluate_objective, one coordinate at a time.
Vector finite_difference_gradient(const CompositionProblem& problem, const Vector& x, double h);
Vector finite_difference_gradient(const CompositionProblem& problem, const Vector& x);

// Block sums shared by the sequential snapshot, the shared-memory phase 1
// and the distributed workers. Sums run in ascending sample order from zero.
Vector sum_inner_values(const CompositionProblem& problem, const Vector& x, IndexRange block);
RowMatrix sum_inner_jacobians(const CompositionProblem& problem, const Vector& x, IndexRange block);
Vector sum_outer_gradients(const CompositionProblem& problem, const Vector& inner, IndexRange block);

/// (sum_k partials[k]) / count, summed in block order starting from zero.
Vector mean_of_partials(std::span<const Vector> partials, std::size_t count);
RowMatrix mean_of_partials(std::span<const RowMatrix> partials, std::size_t count);

/// J^T outer_grad + l2 * x.
Vector composite_gradient(const Jacobian& jacobian, const Vector& outer_grad, const Vector& x,
                          double l2);

}  // namespace asyvrsc
