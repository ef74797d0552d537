#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

#include "asyvrsc/generators.hpp"
#include "asyvrsc/rng.hpp"

namespace asyvrsc {

std::size_t max_pairwise_union(const std::vector<std::vector<std::size_t>>& sets, std::size_t universe) {
  if (sets.empty()) return 0;
  const std::size_t words = (universe + 63) / 64;
  std::vector<std::uint64_t> bits(sets.size() * words, 0);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto k : sets[s]) bits[s * words + k / 64] |= std::uint64_t{1} << (k % 64);
  }
  std::vector<std::size_t> order(sets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sets[a].size() > sets[b].size(); });
  std::size_t best = sets[order.front()].size();
  for (std::size_t ia = 0; ia < order.size(); ++ia) {
    const std::size_t a = order[ia];
    if (sets[a].size() + sets[order.front()].size() <= best) break;
    for (std::size_t ib = 0; ib <= ia; ++ib) {
      const std::size_t b = order[ib];
      if (sets[a].size() + sets[b].size() <= best) break;
      std::size_t count = 0;
      for (std::size_t w = 0; w < words; ++w) {
        count += static_cast<std::size_t>(std::popcount(bits[a * words + w] | bits[b * words + w]));
      }
      best = std::max(best, count);
      if (best == universe) return best;
    }
  }
  return best;
}

void PortfolioConfig::validate() const {
  if (n < 1 || N < 1) throw std::invalid_argument("portfolio: n and N must be >= 1");
  if (!(lambda_min >= 0.0) || !(lambda_max >= lambda_min) || !std::isfinite(lambda_max)) {
    throw std::invalid_argument("portfolio: need lambda_max >= lambda_min >= 0");
  }
  if (!(l2_reg >= 0.0)) throw std::invalid_argument("portfolio: l2_reg must be >= 0");
  if (!(density > 0.0 && density <= 1.0)) {
    throw std::invalid_argument("portfolio: density must lie in (0, 1]");
  }
}

PortfolioProblem::PortfolioProblem(const RowMatrix& rewards, double l2_reg) : l2_(l2_reg) {
  if (rewards.rows() < 1 || rewards.cols() < 1) {
    throw std::invalid_argument("portfolio: reward matrix must be non-empty");
  }
  if (!(l2_reg >= 0.0)) throw std::invalid_argument("portfolio: l2_reg must be >= 0");
  const auto n = static_cast<std::size_t>(rewards.rows());
  const auto N = static_cast<std::size_t>(rewards.cols());
  dims_ = {n, n, N, N + 1};
  rows_.resize(n);
  std::vector<std::vector<std::size_t>> supports(n);
  std::size_t max_nnz = 0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < N; ++k) {
      const double v = rewards(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      if (v != 0.0) {
        rows_[j].index.push_back(k);
        rows_[j].value.push_back(v);
      }
    }
    supports[j] = rows_[j].index;
    max_nnz = std::max(max_nnz, rows_[j].index.size());
  }
  // grad F_i = (2e r_i, -1 - 2e); grad G_j = [I; r_j^T];
  // grad f_ij = 2e r_i + (-1 - 2e) r_j is supported on supp r_i U supp r_j.
  const double Nd = static_cast<double>(N);
  sparsity_.delta_F = static_cast<double>(max_nnz + 1) / (Nd + 1.0);
  sparsity_.delta_G = (Nd + static_cast<double>(max_nnz)) / (Nd * (Nd + 1.0));
  sparsity_.delta_f = static_cast<double>(max_pairwise_union(supports, N)) / Nd;
}

std::size_t PortfolioProblem::nonzeros() const {
  std::size_t total = 0;
  for (const auto& row : rows_) total += row.index.size();
  return total;
}

double PortfolioProblem::dot(std::size_t row, const double* x) const {
  const auto& r = rows_[row];
  double sum = 0.0;
  for (std::size_t e = 0; e < r.index.size(); ++e) sum += r.value[e] * x[r.index[e]];
  return sum;
}

Vector PortfolioProblem::do_inner_value(std::size_t j, const Vector& x) const {
  const auto N = static_cast<Eigen::Index>(dims_.d1);
  Vector g(N + 1);
  g.head(N) = x;
  g[N] = dot(j, x.data());
  return g;
}

Jacobian PortfolioProblem::do_inner_jacobian(std::size_t j, const Vector&) const {
  const std::size_t N = dims_.d1;
  const auto& r = rows_[j];
  std::vector<std::size_t> offsets(N + 2);
  std::vector<std::size_t> index;
  std::vector<double> value;
  index.reserve(N + r.index.size());
  value.reserve(N + r.index.size());
  for (std::size_t k = 0; k < N; ++k) {
    offsets[k] = k;
    index.push_back(k);
    value.push_back(1.0);
  }
  offsets[N] = N;
  index.insert(index.end(), r.index.begin(), r.index.end());
  value.insert(value.end(), r.value.begin(), r.value.end());
  offsets[N + 1] = index.size();
  return Jacobian::sparse(N + 1, N, std::move(offsets), std::move(index), std::move(value));
}

double PortfolioProblem::do_outer_value(std::size_t i, const Vector& y) const {
  const auto N = static_cast<Eigen::Index>(dims_.d1);
  const double e = dot(i, y.data()) - y[N];
  return -y[N] + e * e;
}

Vector PortfolioProblem::do_outer_gradient(std::size_t i, const Vector& y) const {
  const auto N = static_cast<Eigen::Index>(dims_.d1);
  const double e = dot(i, y.data()) - y[N];
  Vector g = Vector::Zero(N + 1);
  const auto& r = rows_[i];
  for (std::size_t k = 0; k < r.index.size(); ++k) {
    g[static_cast<Eigen::Index>(r.index[k])] = 2.0 * e * r.value[k];
  }
  g[N] = -1.0 - 2.0 * e;
  return g;
}

GeneratedPortfolio generate_portfolio(const PortfolioConfig& config) {
  config.validate();
  const auto N = static_cast<Eigen::Index>(config.N);
  const auto n = static_cast<Eigen::Index>(config.n);

  // Random orthogonal eigenvectors.
  RowMatrix gaussian(N, N);
  for (Eigen::Index r = 0; r < N; ++r) {
    Rng rng(stream_seed(config.seed, Stream::kOrthogonal, static_cast<std::uint64_t>(r)));
    for (Eigen::Index c = 0; c < N; ++c) gaussian(r, c) = rng.normal();
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ();

  // Log-spaced spectrum between the extremes.
  const double lo = std::max(config.lambda_min, 1e-6);
  const double hi = std::max(config.lambda_max, lo);
  Vector root_lambda(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const double frac = N == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(N - 1);
    root_lambda[k] = std::sqrt(std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo))));
  }
  const Eigen::MatrixXd factor = q * root_lambda.asDiagonal();

  RowMatrix rewards(n, N);
  Vector z(N);
  for (Eigen::Index j = 0; j < n; ++j) {
    Rng rng(stream_seed(config.seed, Stream::kRewards, static_cast<std::uint64_t>(j)));
    for (Eigen::Index k = 0; k < N; ++k) z[k] = rng.normal();
    rewards.row(j) = (factor * z).cwiseAbs().transpose();
    if (config.density < 1.0) {
      Rng mask(stream_seed(config.seed, Stream::kMask, static_cast<std::uint64_t>(j)));
      for (Eigen::Index k = 0; k < N; ++k) {
        if (!mask.bernoulli(config.density)) rewards(j, k) = 0.0;
      }
    }
  }
  PortfolioInstance instance{std::move(rewards), config};
  PortfolioProblem problem(instance.rewards, config.l2_reg);
  return {std::move(instance), std::move(problem)};
}

PortfolioProblem make_problem(const PortfolioInstance& instance) {
  return PortfolioProblem(instance.rewards, instance.config.l2_reg);
}

}  // namespace asyvrsc
