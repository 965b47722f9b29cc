#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "elugcn/errors.hpp"

namespace elugcn {

// Row-major so that node rows are contiguous; every n x c / n x d quantity in
// the pipeline (X, H, Q, logits ...) uses this type.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kDefaultSmallInverseBound = 64;
inline constexpr double kPivotTolerance = 1e-12;

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Inverse of a small square matrix by LU with partial pivoting.
inline DenseMatrix small_inverse(const DenseMatrix& m,
                                 std::size_t bound = kDefaultSmallInverseBound) {
  require_shape(m.rows() == m.cols(), "small_inverse: matrix is not square");
  const auto c = static_cast<std::size_t>(m.rows());
  if (c > bound)
    throw ShapeError("small_inverse: dimension " + std::to_string(c) + " exceeds bound " +
                     std::to_string(bound));

  DenseMatrix lu = m;
  std::vector<Eigen::Index> perm(c);
  for (std::size_t i = 0; i < c; ++i) perm[i] = static_cast<Eigen::Index>(i);

  const Eigen::Index n = lu.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    double best = std::abs(lu(k, k));
    for (Eigen::Index r = k + 1; r < n; ++r) {
      if (std::abs(lu(r, k)) > best) {
        best = std::abs(lu(r, k));
        pivot = r;
      }
    }
    if (!(best >= kPivotTolerance))
      throw SingularMatrixError("small_inverse: pivot " + std::to_string(best) +
                                " below tolerance at column " + std::to_string(k));
    if (pivot != k) {
      lu.row(k).swap(lu.row(pivot));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pivot)]);
    }
    for (Eigen::Index r = k + 1; r < n; ++r) {
      const double f = lu(r, k) / lu(k, k);
      lu(r, k) = f;
      for (Eigen::Index j = k + 1; j < n; ++j) lu(r, j) -= f * lu(k, j);
    }
  }

  // Solve L U x = P e_j column by column.
  DenseMatrix inv(n, n);
  Vector y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = (perm[static_cast<std::size_t>(i)] == j) ? 1.0 : 0.0;
      for (Eigen::Index t = 0; t < i; ++t) s -= lu(i, t) * y(t);
      y(i) = s;
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double s = y(i);
      for (Eigen::Index t = i + 1; t < n; ++t) s -= lu(i, t) * inv(t, j);
      inv(i, j) = s / lu(i, i);
    }
  }
  return inv;
}

// Applies (H H^T + beta I_N)^{-1} through the Woodbury identity
//   (1/beta) R - (1/beta^2) H (I_c + (1/beta) H^T H)^{-1} H^T R
// without forming anything n x n. The c x c core is factored once so the
// k-step iteration pays O(c^3) only on construction.
class WoodburyInverse {
 public:
  WoodburyInverse(const DenseMatrix& h, double beta) : h_(&h), beta_(beta) {
    if (!(beta > 0.0)) throw ConfigError("woodbury: beta must be > 0");
    const Eigen::Index c = h.cols();
    DenseMatrix core = DenseMatrix::Identity(c, c);
    core.noalias() += (h.transpose() * h) / beta;
    core_inv_ = small_inverse(core);
  }

  double beta() const { return beta_; }
  const DenseMatrix& core_inverse() const { return core_inv_; }

  DenseMatrix apply(const DenseMatrix& r) const {
    require_shape(r.rows() == h_->rows(), "woodbury_apply: row mismatch between H and R");
    const DenseMatrix htr = h_->transpose() * r;   // c x m
    const DenseMatrix inner = core_inv_ * htr;     // c x m
    DenseMatrix out = r / beta_;
    out.noalias() -= (*h_ * inner) / (beta_ * beta_);
    return out;
  }

  // R^T (H H^T + beta I)^{-1}, i.e. apply from the right; inverse is symmetric.
  DenseMatrix apply_transposed(const DenseMatrix& r) const {
    return apply(r).transpose();
  }

 private:
  const DenseMatrix* h_;
  double beta_;
  DenseMatrix core_inv_;
};

inline DenseMatrix woodbury_apply(const DenseMatrix& h, double beta, const DenseMatrix& r) {
  return WoodburyInverse(h, beta).apply(r);
}

inline double logsumexp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  CompensatedSum acc;
  for (double v : values) acc.add(std::exp(v - m));
  return m + std::log(acc.value());
}

inline void softmax_row_inplace(std::span<double> row) {
  if (row.empty()) return;
  const double m = *std::max_element(row.begin(), row.end());
  CompensatedSum acc;
  for (double& v : row) {
    v = std::exp(v - m);
    acc.add(v);
  }
  const double z = acc.value();
  for (double& v : row) v /= z;
}

inline DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    softmax_row_inplace(std::span<double>(out.row(i).data(), static_cast<std::size_t>(out.cols())));
  return out;
}

// Row-wise log-softmax, stable for large logits.
inline DenseMatrix log_softmax_rows(const DenseMatrix& logits) {
  DenseMatrix out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double lse = logsumexp(
        std::span<const double>(logits.row(i).data(), static_cast<std::size_t>(logits.cols())));
    out.row(i).array() -= lse;
  }
  return out;
}

// Index of the row maximum; ties resolve to the lowest index.
template <typename Row>
Eigen::Index argmax_lowest(const Row& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;
  return best;
}

// Central-difference gradient check. Returns
//   max_i |fd_i - g_i| / max(|fd_i|, |g_i|, 1e-6).
// Below the floor the comparison is absolute: central differences at
// h = 1e-5 carry about 1e-11 of rounding noise, so entries of that size
// have no meaningful relative error.
// `f` maps a DenseMatrix point to a scalar; `grad` has the same shape as x.
template <typename F>
double finite_diff_check(F&& f, const DenseMatrix& grad, const DenseMatrix& x, double h = 1e-5) {
  require_shape(grad.rows() == x.rows() && grad.cols() == x.cols(),
                "finite_diff_check: gradient shape differs from point");
  DenseMatrix probe = x;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(static_cast<const DenseMatrix&>(probe));
    probe.data()[i] = orig - h;
    const double down = f(static_cast<const DenseMatrix&>(probe));
    probe.data()[i] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double g = grad.data()[i];
    worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}));
  }
  return worst;
}

}  // namespace elugcn
