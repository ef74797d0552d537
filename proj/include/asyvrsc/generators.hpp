#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asyvrsc/problem.hpp"

namespace asyvrsc {

// ---------------------------------------------------------------------------
// Portfolio mean-variance
// ---------------------------------------------------------------------------

struct PortfolioConfig {
  std::size_t n = 1000;     ///< number of reward samples
  std::size_t N = 50;       ///< number of assets (d1)
  double lambda_max = 10.0; ///< largest covariance eigenvalue
  double lambda_min = 1.0;  ///< smallest covariance eigenvalue; 0 is clamped to 1e-6
  double l2_reg = 0.0;
  double density = 1.0;     ///< probability that a reward entry is kept
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const PortfolioConfig&, const PortfolioConfig&) = default;
};

struct PortfolioInstance {
  RowMatrix rewards;  ///< n x N, nonnegative
  PortfolioConfig config;
};

/// Mean-variance portfolio objective
///   -(1/n) sum_i <r_i, x> + (1/n) sum_i (<r_i, x> - (1/n) sum_j <r_j, x>)^2
/// written as a composition with
///   G_j(x) = (x, <r_j, x>) in R^{N+1}
///   F_i(y) = -y[N] + (<r_i, y[0:N]> - y[N])^2.
class PortfolioProblem final : public CompositionProblem {
 public:
  PortfolioProblem(const RowMatrix& rewards, double l2_reg);

  Dimensions dimensions() const override { return dims_; }
  double l2_weight() const override { return l2_; }
  bool constant_jacobians() const override { return true; }
  SparsityProfile sparsity() const override { return sparsity_; }

  std::size_t nonzeros() const;

 protected:
  Vector do_inner_value(std::size_t j, const Vector& x) const override;
  Jacobian do_inner_jacobian(std::size_t j, const Vector& x) const override;
  double do_outer_value(std::size_t i, const Vector& y) const override;
  Vector do_outer_gradient(std::size_t i, const Vector& y) const override;

 private:
  struct SparseRow {
    std::vector<std::size_t> index;
    std::vector<double> value;
  };
  double dot(std::size_t row, const double* x) const;

  Dimensions dims_;
  double l2_;
  std::vector<SparseRow> rows_;
  SparsityProfile sparsity_;
};

struct GeneratedPortfolio {
  PortfolioInstance instance;
  PortfolioProblem problem;
};

/// Rewards are |L z| with z standard normal and L L^T a covariance whose
/// spectrum is log-spaced between lambda_min and lambda_max (eigenvectors
/// from the QR factor of a Gaussian matrix); each entry is then kept with
/// probability `density`. Deterministic in the seed.
GeneratedPortfolio generate_portfolio(const PortfolioConfig& config);
PortfolioProblem make_problem(const PortfolioInstance& instance);

// ---------------------------------------------------------------------------
// MDP policy evaluation
// ---------------------------------------------------------------------------

struct MdpConfig {
  std::size_t S = 100;               ///< number of states
  std::size_t d = 10;                ///< feature dimension (d1)
  std::size_t actions_per_state = 10;  ///< recorded only; P^pi is drawn directly
  double discount = 0.95;
  double l2_reg = 1e-5;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const MdpConfig&, const MdpConfig&) = default;
};

struct MdpInstance {
  RowMatrix transition;  ///< S x S, row-stochastic
  RowMatrix features;    ///< S x d, entries in [0, 1]
  RowMatrix rewards;     ///< S x S
  MdpConfig config;
};

/// Mean squared Bellman residual of a linear value function under a fixed
/// policy, with n1 = n2 = S, d2 = 2S and (0-based)
///   G_j(x)[2k]   = phi_k^T x
///   G_j(x)[2k+1] = S P[k,j] (r[k,j] + gamma phi_j^T x)
///   F_i(y)       = (y[2i] - y[2i+1])^2.
class MdpProblem final : public CompositionProblem {
 public:
  MdpProblem(RowMatrix transition, RowMatrix features, RowMatrix rewards, double discount,
             double l2_reg);

  Dimensions dimensions() const override { return dims_; }
  double l2_weight() const override { return l2_; }
  bool constant_jacobians() const override { return true; }
  SparsityProfile sparsity() const override { return sparsity_; }

 protected:
  Vector do_inner_value(std::size_t j, const Vector& x) const override;
  Jacobian do_inner_jacobian(std::size_t j, const Vector& x) const override;
  double do_outer_value(std::size_t i, const Vector& y) const override;
  Vector do_outer_gradient(std::size_t i, const Vector& y) const override;

 private:
  Dimensions dims_;
  RowMatrix transition_;
  RowMatrix features_;
  RowMatrix rewards_;
  double discount_;
  double l2_;
  SparsityProfile sparsity_;
};

struct GeneratedMdp {
  MdpInstance instance;
  MdpProblem problem;
};

/// Transition rows and features uniform on [0, 1], transition rows then
/// normalised to sum to one; rewards uniform on [0, 1].
GeneratedMdp generate_mdp(const MdpConfig& config);
MdpProblem make_problem(const MdpInstance& instance);

/// Largest |A_a union A_b| over all pairs (a, b) of index sets, a == b included.
std::size_t max_pairwise_union(const std::vector<std::vector<std::size_t>>& sets, std::size_t universe);

}  // namespace asyvrsc
