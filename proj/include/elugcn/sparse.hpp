#pragma once

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <vector>

#include "elugcn/numerics.hpp"

namespace elugcn {

struct Triplet {
  std::int64_t row;
  std::int64_t col;
  double value;
};

// Compressed sparse row matrix. The only graph-touching primitive in the
// models: Â, S* and any test operator go through `multiply`.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  // Duplicate (row, col) pairs are summed; column order within a row is sorted.
  static CsrMatrix from_triplets(std::int64_t rows, std::int64_t cols,
                                 std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw ShapeError("CsrMatrix: triplet index out of range");
    }
    const auto less = [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    };
    if (!std::is_sorted(triplets.begin(), triplets.end(), less))
      std::stable_sort(triplets.begin(), triplets.end(), less);
    CsrMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      const auto& t = triplets[i];
      if (!m.col_idx_.empty() && i > 0 && triplets[i - 1].row == t.row &&
          triplets[i - 1].col == t.col) {
        m.values_.back() += t.value;
        continue;
      }
      m.col_idx_.push_back(t.col);
      m.values_.push_back(t.value);
      ++m.row_ptr_[static_cast<std::size_t>(t.row) + 1];
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r)
      m.row_ptr_[r + 1] += m.row_ptr_[r];
    return m;
  }

  // Takes ownership of arrays already in CSR form: row_ptr has rows + 1
  // non-decreasing offsets and columns are strictly increasing within a row.
  static CsrMatrix from_csr(std::int64_t rows, std::int64_t cols, std::vector<std::int64_t> row_ptr,
                            std::vector<std::int64_t> col_idx, std::vector<double> values) {
    if (static_cast<std::int64_t>(row_ptr.size()) != rows + 1 || row_ptr.front() != 0 ||
        row_ptr.back() != static_cast<std::int64_t>(col_idx.size()) || col_idx.size() != values.size())
      throw ShapeError("CsrMatrix: inconsistent CSR arrays");
    for (std::int64_t r = 0; r < rows; ++r) {
      const auto b = row_ptr[static_cast<std::size_t>(r)], e = row_ptr[static_cast<std::size_t>(r) + 1];
      if (e < b) throw ShapeError("CsrMatrix: row offsets decrease");
      for (auto i = b; i < e; ++i) {
        const auto c = col_idx[static_cast<std::size_t>(i)];
        if (c < 0 || c >= cols || (i > b && c <= col_idx[static_cast<std::size_t>(i) - 1]))
          throw ShapeError("CsrMatrix: column indices out of range or unsorted");
      }
    }
    CsrMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    m.values_ = std::move(values);
    return m;
  }

  static CsrMatrix from_dense(const DenseMatrix& d, bool keep_zeros = false) {
    std::vector<Triplet> ts;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = 0; j < d.cols(); ++j)
        if (keep_zeros || d(i, j) != 0.0) ts.push_back({i, j, d(i, j)});
    return from_triplets(d.rows(), d.cols(), std::move(ts));
  }

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::int64_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  // Value at (r, c) or 0 when absent. Binary search within the row.
  double at(std::int64_t r, std::int64_t c) const {
    const auto b = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(r)];
    const auto e = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(r) + 1];
    const auto it = std::lower_bound(b, e, c);
    if (it == e || *it != c) return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::int64_t r = 0; r < rows_; ++r)
      for (auto k = row_ptr_[static_cast<std::size_t>(r)];
           k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k)
        f(r, col_idx_[static_cast<std::size_t>(k)], values_[static_cast<std::size_t>(k)]);
  }

  DenseMatrix multiply(const DenseMatrix& x) const {
    require_shape(x.rows() == cols_, "CsrMatrix::multiply: inner dimension mismatch");
    DenseMatrix out = DenseMatrix::Zero(rows_, x.cols());
    for (std::int64_t r = 0; r < rows_; ++r) {
      auto row = out.row(r);
      for (auto k = row_ptr_[static_cast<std::size_t>(r)];
           k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k)
        row.noalias() += values_[static_cast<std::size_t>(k)] *
                         x.row(col_idx_[static_cast<std::size_t>(k)]);
    }
    return out;
  }

  // this^T * x, accumulated in row order (deterministic).
  DenseMatrix multiply_transposed(const DenseMatrix& x) const {
    require_shape(x.rows() == rows_, "CsrMatrix::multiply_transposed: dimension mismatch");
    DenseMatrix out = DenseMatrix::Zero(cols_, x.cols());
    for (std::int64_t r = 0; r < rows_; ++r)
      for (auto k = row_ptr_[static_cast<std::size_t>(r)];
           k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k)
        out.row(col_idx_[static_cast<std::size_t>(k)]).noalias() +=
            values_[static_cast<std::size_t>(k)] * x.row(r);
    return out;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d = DenseMatrix::Zero(rows_, cols_);
    for_each([&](std::int64_t r, std::int64_t c, double v) { d(r, c) = v; });
    return d;
  }

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<std::int64_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace elugcn
