#include <algorithm>
#include <cmath>

#include "asyvrsc/generators.hpp"
#include "asyvrsc/rng.hpp"

namespace asyvrsc {

void MdpConfig::validate() const {
  if (S < 1 || d < 1) throw std::invalid_argument("mdp: S and d must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) {
    throw std::invalid_argument("mdp: discount must lie in (0, 1)");
  }
  if (!(l2_reg >= 0.0)) throw std::invalid_argument("mdp: l2_reg must be >= 0");
}

MdpProblem::MdpProblem(RowMatrix transition, RowMatrix features, RowMatrix rewards, double discount,
                       double l2_reg)
    : transition_(std::move(transition)),
      features_(std::move(features)),
      rewards_(std::move(rewards)),
      discount_(discount),
      l2_(l2_reg) {
  const auto S = transition_.rows();
  if (S < 1 || transition_.cols() != S || rewards_.rows() != S || rewards_.cols() != S ||
      features_.rows() != S || features_.cols() < 1) {
    throw DimensionError("mdp: need S x S transition and rewards and S x d features");
  }
  if ((transition_.array() < 0.0).any()) {
    throw std::invalid_argument("mdp: transition probabilities must be nonnegative");
  }
  if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("mdp: discount must lie in (0, 1)");
  if (!(l2_reg >= 0.0)) throw std::invalid_argument("mdp: l2_reg must be >= 0");
  const auto s = static_cast<std::size_t>(S);
  const auto d = static_cast<std::size_t>(features_.cols());
  dims_ = {s, s, d, 2 * s};

  std::vector<std::vector<std::size_t>> support(s);
  std::vector<std::size_t> row_nnz(s);
  std::size_t feature_nnz = 0;
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t c = 0; c < d; ++c) {
      if (features_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) != 0.0) {
        support[k].push_back(c);
      }
    }
    row_nnz[k] = support[k].size();
    feature_nnz += row_nnz[k];
  }
  std::size_t max_jacobian_nnz = 0;
  for (std::size_t j = 0; j < s; ++j) {
    std::size_t reached = 0;
    for (std::size_t k = 0; k < s; ++k) {
      if (transition_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) != 0.0) ++reached;
    }
    max_jacobian_nnz = std::max(max_jacobian_nnz, feature_nnz + reached * row_nnz[j]);
  }
  // grad f_ij is supported on supp phi_i, plus supp phi_j when P[i,j] != 0;
  // the union over all pairs is exact for dense P and an upper bound otherwise.
  sparsity_.delta_F = 2.0 / static_cast<double>(2 * s);
  sparsity_.delta_G = static_cast<double>(max_jacobian_nnz) / static_cast<double>(2 * s * d);
  sparsity_.delta_f = static_cast<double>(max_pairwise_union(support, d)) / static_cast<double>(d);
}

Vector MdpProblem::do_inner_value(std::size_t j, const Vector& x) const {
  const auto S = static_cast<Eigen::Index>(dims_.n2);
  const auto jj = static_cast<Eigen::Index>(j);
  const Vector values = features_ * x;
  const double scale = static_cast<double>(S);
  Vector g(2 * S);
  for (Eigen::Index k = 0; k < S; ++k) {
    g[2 * k] = values[k];
    g[2 * k + 1] = scale * transition_(k, jj) * (rewards_(k, jj) + discount_ * values[jj]);
  }
  return g;
}

Jacobian MdpProblem::do_inner_jacobian(std::size_t j, const Vector&) const {
  const auto S = static_cast<Eigen::Index>(dims_.n2);
  const auto jj = static_cast<Eigen::Index>(j);
  const double scale = static_cast<double>(S);
  RowMatrix jac(2 * S, features_.cols());
  for (Eigen::Index k = 0; k < S; ++k) {
    jac.row(2 * k) = features_.row(k);
    jac.row(2 * k + 1) = (scale * transition_(k, jj) * discount_) * features_.row(jj);
  }
  return Jacobian::dense(std::move(jac));
}

double MdpProblem::do_outer_value(std::size_t i, const Vector& y) const {
  const auto ii = static_cast<Eigen::Index>(i);
  const double e = y[2 * ii] - y[2 * ii + 1];
  return e * e;
}

Vector MdpProblem::do_outer_gradient(std::size_t i, const Vector& y) const {
  const auto ii = static_cast<Eigen::Index>(i);
  const double e = y[2 * ii] - y[2 * ii + 1];
  Vector g = Vector::Zero(y.size());
  g[2 * ii] = 2.0 * e;
  g[2 * ii + 1] = -2.0 * e;
  return g;
}

GeneratedMdp generate_mdp(const MdpConfig& config) {
  config.validate();
  const auto S = static_cast<Eigen::Index>(config.S);
  const auto d = static_cast<Eigen::Index>(config.d);
  RowMatrix transition(S, S);
  RowMatrix features(S, d);
  RowMatrix rewards(S, S);
  for (Eigen::Index k = 0; k < S; ++k) {
    const auto row = static_cast<std::uint64_t>(k);
    Rng p(stream_seed(config.seed, Stream::kTransition, row));
    for (Eigen::Index c = 0; c < S; ++c) transition(k, c) = p.uniform();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < S; ++c) sum += transition(k, c);
    for (Eigen::Index c = 0; c < S; ++c) transition(k, c) /= sum;

    Rng phi(stream_seed(config.seed, Stream::kFeatures, row));
    for (Eigen::Index c = 0; c < d; ++c) features(k, c) = phi.uniform();

    Rng r(stream_seed(config.seed, Stream::kMdpRewards, row));
    for (Eigen::Index c = 0; c < S; ++c) rewards(k, c) = r.uniform();
  }
  MdpInstance instance{std::move(transition), std::move(features), std::move(rewards), config};
  MdpProblem problem = make_problem(instance);
  return {std::move(instance), std::move(problem)};
}

MdpProblem make_problem(const MdpInstance& instance) {
  return MdpProblem(instance.transition, instance.features, instance.rewards,
                    instance.config.discount, instance.config.l2_reg);
}

}  // namespace asyvrsc
