#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "asyvrsc/problem.hpp"
#include "asyvrsc/rng.hpp"

namespace asyvrsc::testing {

/// Smooth nonlinear problem with x-dependent Jacobians:
///   G_j(x)_k = sin(<a_jk, x>) + <b_jk, x>
///   F_i(y)   = sum_k c_ik log(1 + y_k^2) + <e_i, y>
class ToyProblem final : public CompositionProblem {
 public:
  ToyProblem(std::size_t n1, std::size_t n2, std::size_t d1, std::size_t d2, std::uint64_t seed, double l2 = 0.0)
      : dims_{n1, n2, d1, d2}, l2_(l2) {
    Rng rng(seed);
    a_.resize(n2);
    b_.resize(n2);
    for (std::size_t j = 0; j < n2; ++j) {
      a_[j] = RowMatrix(d2, d1);
      b_[j] = RowMatrix(d2, d1);
      for (Eigen::Index k = 0; k < a_[j].size(); ++k) {
        a_[j].data()[k] = rng.normal();
        b_[j].data()[k] = 0.5 * rng.normal();
      }
    }
    c_ = RowMatrix(n1, d2);
    e_ = RowMatrix(n1, d2);
    for (Eigen::Index k = 0; k < c_.size(); ++k) {
      c_.data()[k] = 0.5 + rng.uniform();
      e_.data()[k] = rng.normal();
    }
  }

  Dimensions dimensions() const override { return dims_; }
  double l2_weight() const override { return l2_; }

  const RowMatrix& a(std::size_t j) const { return a_[j]; }
  const RowMatrix& b(std::size_t j) const { return b_[j]; }
  double c(std::size_t i, std::size_t k) const { return c_(i, k); }
  double e(std::size_t i, std::size_t k) const { return e_(i, k); }

 protected:
  Vector do_inner_value(std::size_t j, const Vector& x) const override {
    Vector out(dims_.d2);
    for (std::size_t k = 0; k < dims_.d2; ++k) out[k] = std::sin(a_[j].row(k).dot(x)) + b_[j].row(k).dot(x);
    return out;
  }
  Jacobian do_inner_jacobian(std::size_t j, const Vector& x) const override {
    RowMatrix J(dims_.d2, dims_.d1);
    for (std::size_t k = 0; k < dims_.d2; ++k) {
      J.row(k) = std::cos(a_[j].row(k).dot(x)) * a_[j].row(k) + b_[j].row(k);
    }
    return Jacobian::dense(std::move(J));
  }
  double do_outer_value(std::size_t i, const Vector& y) const override {
    double v = 0.0;
    for (std::size_t k = 0; k < dims_.d2; ++k) v += c_(i, k) * std::log1p(y[k] * y[k]) + e_(i, k) * y[k];
    return v;
  }
  Vector do_outer_gradient(std::size_t i, const Vector& y) const override {
    Vector g(dims_.d2);
    for (std::size_t k = 0; k < dims_.d2; ++k) g[k] = 2.0 * c_(i, k) * y[k] / (1.0 + y[k] * y[k]) + e_(i, k);
    return g;
  }

 private:
  Dimensions dims_;
  double l2_;
  std::vector<RowMatrix> a_, b_;
  RowMatrix c_, e_;
};

/// n1 = n2 = 1, G(x) = x, F(y) = 0.5 ||y - c||^2; minimiser x = c with an
/// exactly zero gradient there.
class CenteredQuadratic final : public CompositionProblem {
 public:
  explicit CenteredQuadratic(Vector center) : c_(std::move(center)) {}
  Dimensions dimensions() const override {
    const auto d = static_cast<std::size_t>(c_.size());
    return {1, 1, d, d};
  }
  bool constant_jacobians() const override { return true; }

 protected:
  Vector do_inner_value(std::size_t, const Vector& x) const override { return x; }
  Jacobian do_inner_jacobian(std::size_t, const Vector&) const override {
    return Jacobian::dense(RowMatrix::Identity(c_.size(), c_.size()));
  }
  double do_outer_value(std::size_t, const Vector& y) const override { return 0.5 * (y - c_).squaredNorm(); }
  Vector do_outer_gradient(std::size_t, const Vector& y) const override { return y - c_; }

 private:
  Vector c_;
};

/// Problem assembled from callables, for hand-checkable examples.
class FunctionProblem final : public CompositionProblem {
 public:
  using Inner = std::function<Vector(std::size_t, const Vector&)>;
  using InnerJac = std::function<RowMatrix(std::size_t, const Vector&)>;
  using Outer = std::function<double(std::size_t, const Vector&)>;
  using OuterGrad = std::function<Vector(std::size_t, const Vector&)>;

  FunctionProblem(Dimensions dims, Inner g, InnerJac jg, Outer f, OuterGrad gf, double l2 = 0.0)
      : dims_(dims), g_(std::move(g)), jg_(std::move(jg)), f_(std::move(f)), gf_(std::move(gf)), l2_(l2) {}

  Dimensions dimensions() const override { return dims_; }
  double l2_weight() const override { return l2_; }

 protected:
  Vector do_inner_value(std::size_t j, const Vector& x) const override { return g_(j, x); }
  Jacobian do_inner_jacobian(std::size_t j, const Vector& x) const override { return Jacobian::dense(jg_(j, x)); }
  double do_outer_value(std::size_t i, const Vector& y) const override { return f_(i, y); }
  Vector do_outer_gradient(std::size_t i, const Vector& y) const override { return gf_(i, y); }

 private:
  Dimensions dims_;
  Inner g_;
  InnerJac jg_;
  Outer f_;
  OuterGrad gf_;
  double l2_;
};

/// G_j(x) = x for every j, F_i(y) = ||y||^2.
inline FunctionProblem identity_square(std::size_t d, std::size_t n1 = 1, std::size_t n2 = 1) {
  return FunctionProblem(
      {n1, n2, d, d}, [](std::size_t, const Vector& x) { return x; },
      [d](std::size_t, const Vector&) { return RowMatrix(RowMatrix::Identity(d, d)); },
      [](std::size_t, const Vector& y) { return y.squaredNorm(); },
      [](std::size_t, const Vector& y) { return Vector(2.0 * y); });
}

inline Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = scale * rng.normal();
  return v;
}

/// max |a - b| / max(1, |b|) over entries.
template <typename A, typename B>
double max_rel_diff(const A& a, const B& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double d = std::abs(a.data()[k] - b.data()[k]) / std::max(1.0, std::abs(b.data()[k]));
    worst = std::max(worst, d);
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("asyvrsc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace asyvrsc::testing
