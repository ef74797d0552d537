#pragma once

#include <cstddef>
#include <cstring>

#include <Eigen/Dense>

namespace asyvrsc {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Sizes of a finite-sum composition problem: n1 outer samples, n2 inner
/// samples, parameter dimension d1, inner-value dimension d2.
struct Dimensions {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;

  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// Bitwise equality of two dense arrays (sizes included); NaN payloads compare by bits.
template <typename A, typename B>
bool bitwise_equal(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace asyvrsc
