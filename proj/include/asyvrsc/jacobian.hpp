#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "asyvrsc/types.hpp"

namespace asyvrsc {

/// A d2 x d1 Jacobian held either as a dense row-major matrix or in
/// compressed sparse row form. Column indices within a sparse row are
/// strictly increasing.
///
/// Products with a vector accumulate column-wise contributions in ascending
/// row order and skip rows whose multiplier is zero. The subset product
/// follows the same order per column, so a coordinate computed through
/// either path is bitwise identical.
class Jacobian {
 public:
  Jacobian() = default;

  static Jacobian zeros(std::size_t rows, std::size_t cols);
  static Jacobian dense(RowMatrix values);
  static Jacobian sparse(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                         std::vector<std::size_t> col_indices, std::vector<double> values);
  /// Drops exact zeros; stores sparse when the remaining fill is at most
  /// `max_density`, dense otherwise.
  static Jacobian compact(const RowMatrix& values, double max_density = 0.25);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_sparse() const { return sparse_; }
  std::size_t nonzeros() const;

  double coeff(std::size_t r, std::size_t c) const;
  RowMatrix to_dense() const;

  /// acc += J
  void add_to(RowMatrix& acc) const;

  /// out = J^T v
  void transpose_multiply(const Vector& v, Vector& out) const;
  Vector transpose_multiply(const Vector& v) const;

  /// out[m] = (J^T v)[cols[m]] for each m.
  void transpose_multiply(const Vector& v, std::span<const std::size_t> cols,
                          std::span<double> out) const;

  /// Column indices of the entries stored in row r.
  std::vector<std::size_t> row_pattern(std::size_t r) const;

  friend bool operator==(const Jacobian& a, const Jacobian& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool sparse_ = false;
  RowMatrix dense_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

}  // namespace asyvrsc
