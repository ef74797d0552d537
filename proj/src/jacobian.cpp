#include "asyvrsc/jacobian.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace asyvrsc {

Jacobian Jacobian::zeros(std::size_t rows, std::size_t cols) {
  return dense(RowMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
}

Jacobian Jacobian::dense(RowMatrix values) {
  Jacobian j;
  j.rows_ = static_cast<std::size_t>(values.rows());
  j.cols_ = static_cast<std::size_t>(values.cols());
  j.sparse_ = false;
  j.dense_ = std::move(values);
  return j;
}

Jacobian Jacobian::sparse(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                          std::vector<std::size_t> col_indices, std::vector<double> values) {
  if (row_offsets.size() != rows + 1 || row_offsets.front() != 0 ||
      row_offsets.back() != col_indices.size() || col_indices.size() != values.size()) {
    throw std::invalid_argument("Jacobian::sparse: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_offsets[r] > row_offsets[r + 1]) {
      throw std::invalid_argument("Jacobian::sparse: row offsets must be non-decreasing");
    }
    for (std::size_t e = row_offsets[r]; e < row_offsets[r + 1]; ++e) {
      if (col_indices[e] >= cols || (e > row_offsets[r] && col_indices[e] <= col_indices[e - 1])) {
        throw std::invalid_argument("Jacobian::sparse: column indices must be increasing and < " +
                                    std::to_string(cols));
      }
    }
  }
  Jacobian j;
  j.rows_ = rows;
  j.cols_ = cols;
  j.sparse_ = true;
  j.offsets_ = std::move(row_offsets);
  j.indices_ = std::move(col_indices);
  j.values_ = std::move(values);
  return j;
}

Jacobian Jacobian::compact(const RowMatrix& values, double max_density) {
  const auto rows = static_cast<std::size_t>(values.rows());
  const auto cols = static_cast<std::size_t>(values.cols());
  std::size_t nnz = 0;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (values.data()[k] != 0.0) ++nnz;
  }
  const double total = static_cast<double>(rows) * static_cast<double>(cols);
  if (total == 0.0 || static_cast<double>(nnz) > max_density * total) {
    RowMatrix copy = values;
    for (Eigen::Index k = 0; k < copy.size(); ++k) {
      if (copy.data()[k] == 0.0) copy.data()[k] = 0.0;  // normalise -0
    }
    return dense(std::move(copy));
  }
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> vals;
  indices.reserve(nnz);
  vals.reserve(nnz);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (v != 0.0) {
        indices.push_back(c);
        vals.push_back(v);
      }
    }
    offsets[r + 1] = indices.size();
  }
  Jacobian j;
  j.rows_ = rows;
  j.cols_ = cols;
  j.sparse_ = true;
  j.offsets_ = std::move(offsets);
  j.indices_ = std::move(indices);
  j.values_ = std::move(vals);
  return j;
}

std::size_t Jacobian::nonzeros() const {
  if (sparse_) return values_.size();
  std::size_t nnz = 0;
  for (Eigen::Index k = 0; k < dense_.size(); ++k) {
    if (dense_.data()[k] != 0.0) ++nnz;
  }
  return nnz;
}

double Jacobian::coeff(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw std::out_of_range("Jacobian::coeff: index out of range");
  if (!sparse_) return dense_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  const auto first = indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[r]);
  const auto last = indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[r + 1]);
  const auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - indices_.begin())];
}

RowMatrix Jacobian::to_dense() const {
  if (!sparse_) return dense_;
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  add_to(out);
  return out;
}

void Jacobian::add_to(RowMatrix& acc) const {
  if (static_cast<std::size_t>(acc.rows()) != rows_ || static_cast<std::size_t>(acc.cols()) != cols_) {
    throw std::invalid_argument("Jacobian::add_to: shape mismatch");
  }
  if (!sparse_) {
    acc += dense_;
    return;
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t e = offsets_[r]; e < offsets_[r + 1]; ++e) {
      acc(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(indices_[e])) += values_[e];
    }
  }
}

void Jacobian::transpose_multiply(const Vector& v, Vector& out) const {
  if (static_cast<std::size_t>(v.size()) != rows_) {
    throw std::invalid_argument("Jacobian::transpose_multiply: expected vector of length " +
                                std::to_string(rows_));
  }
  out.setZero(static_cast<Eigen::Index>(cols_));
  double* o = out.data();
  for (std::size_t r = 0; r < rows_; ++r) {
    const double w = v[static_cast<Eigen::Index>(r)];
    if (w == 0.0) continue;
    if (sparse_) {
      for (std::size_t e = offsets_[r]; e < offsets_[r + 1]; ++e) o[indices_[e]] += w * values_[e];
    } else {
      const double* row = dense_.data() + r * cols_;
      for (std::size_t c = 0; c < cols_; ++c) o[c] += w * row[c];
    }
  }
}

Vector Jacobian::transpose_multiply(const Vector& v) const {
  Vector out;
  transpose_multiply(v, out);
  return out;
}

void Jacobian::transpose_multiply(const Vector& v, std::span<const std::size_t> cols,
                                  std::span<double> out) const {
  if (static_cast<std::size_t>(v.size()) != rows_ || out.size() != cols.size()) {
    throw std::invalid_argument("Jacobian::transpose_multiply: size mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double w = v[static_cast<Eigen::Index>(r)];
    if (w == 0.0) continue;
    if (sparse_) {
      const auto first = indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[r]);
      const auto last = indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[r + 1]);
      if (first == last) continue;
      for (std::size_t m = 0; m < cols.size(); ++m) {
        const auto it = std::lower_bound(first, last, cols[m]);
        if (it != last && *it == cols[m]) {
          out[m] += w * values_[static_cast<std::size_t>(it - indices_.begin())];
        }
      }
    } else {
      const double* row = dense_.data() + r * cols_;
      for (std::size_t m = 0; m < cols.size(); ++m) out[m] += w * row[cols[m]];
    }
  }
}

std::vector<std::size_t> Jacobian::row_pattern(std::size_t r) const {
  if (r >= rows_) throw std::out_of_range("Jacobian::row_pattern: row out of range");
  if (sparse_) {
    return {indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[r]),
            indices_.begin() + static_cast<std::ptrdiff_t>(offsets_[r + 1])};
  }
  std::vector<std::size_t> cols;
  const double* row = dense_.data() + r * cols_;
  for (std::size_t c = 0; c < cols_; ++c) {
    if (row[c] != 0.0) cols.push_back(c);
  }
  return cols;
}

bool operator==(const Jacobian& a, const Jacobian& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.sparse_ != b.sparse_) return false;
  if (!a.sparse_) return bitwise_equal(a.dense_, b.dense_);
  return a.offsets_ == b.offsets_ && a.indices_ == b.indices_ &&
         (a.values_.empty() ||
          std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) == 0);
}

}  // namespace asyvrsc
