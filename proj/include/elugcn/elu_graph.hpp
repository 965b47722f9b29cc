#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "elugcn/partition.hpp"
#include "elugcn/propagation.hpp"

namespace elugcn {

inline constexpr std::int64_t kClosedFormMaxNodes = 2048;
inline constexpr std::int64_t kHeatmapMaxNodes = 4096;

struct EluGraphConfig {
  std::optional<double> beta;  // unset: n / c
  int k = 10;
  double keep_fraction = 0.1;
  bool clip_negative = false;
  Eigen::Index block_rows = 256;
  bool keep_dense = false;  // also return S* before thresholding (n <= 2048)
};

// With beta far below n / c the Q-update, which is quadratic in Q, grows
// without bound; n / c is the expected size of a class block of H H^T.
inline double resolved_beta(const EluGraphConfig& cfg, Eigen::Index n, Eigen::Index c) {
  return cfg.beta ? *cfg.beta : static_cast<double>(n) / static_cast<double>(std::max<Eigen::Index>(1, c));
}

struct ExpandedLabels {
  DenseMatrix y;                  // Y with one-hot pseudo-label rows for ELU nodes
  std::vector<NodeId> clamp_set;  // train ∪ V_ELU, sorted
};

inline ExpandedLabels expand_labels(const LabelSet& labels, const EluPartition& p,
                                    const DenseMatrix& gcn_probs) {
  require_shape(gcn_probs.rows() == labels.num_nodes() && gcn_probs.cols() == labels.num_classes,
                "expand_labels: gcn_probs must be n x c");
  ExpandedLabels out{labels.onehot(), labels.train};
  for (NodeId v : p.v_elu) {
    out.y.row(v).setZero();
    out.y(v, argmax_lowest(gcn_probs.row(v))) = 1.0;
    out.clamp_set.push_back(v);
  }
  std::sort(out.clamp_set.begin(), out.clamp_set.end());
  out.clamp_set.erase(std::unique(out.clamp_set.begin(), out.clamp_set.end()), out.clamp_set.end());
  return out;
}

// S = H Q^T (H H^T + beta I_N)^{-1}, evaluated densely. Test/oracle use only.
inline DenseMatrix closed_form_S(const DenseMatrix& h, const DenseMatrix& q, double beta) {
  require_shape(h.rows() == q.rows() && h.cols() == q.cols(), "closed_form_S: H and Q differ in shape");
  if (h.rows() > kClosedFormMaxNodes)
    throw ConfigError("closed_form_S: n=" + std::to_string(h.rows()) +
                      " is too large to materialize; limit is " +
                      std::to_string(kClosedFormMaxNodes));
  if (!(beta > 0.0)) throw ConfigError("closed_form_S: beta must be > 0");
  DenseMatrix gram = h * h.transpose();
  gram.diagonal().array() += beta;
  // (H H^T + beta I) is SPD; S^T = G^{-1} Q H^T.
  const DenseMatrix st = gram.llt().solve(q * h.transpose());
  return st.transpose();
}

// One propagation step Q_next = S(Q_prev) Q_prev computed as
// H [Q_prev^T (H H^T + beta I)^{-1} Q_prev], then clamped.
inline DenseMatrix q_update(const DenseMatrix& h, const WoodburyInverse& inv, const DenseMatrix& q_prev,
                            const std::vector<NodeId>& clamp_set, const DenseMatrix& y_expanded) {
  require_shape(h.rows() == q_prev.rows() && h.cols() == q_prev.cols(),
                "q_update: H and Q differ in shape");
  const DenseMatrix core = q_prev.transpose() * inv.apply(q_prev);  // c x c
  DenseMatrix next = h * core;
  clamp_rows(next, y_expanded, clamp_set);
  return next;
}

inline DenseMatrix q_update(const DenseMatrix& h, const DenseMatrix& q_prev, double beta,
                            const std::vector<NodeId>& clamp_set, const DenseMatrix& y_expanded) {
  return q_update(h, WoodburyInverse(h, beta), q_prev, clamp_set, y_expanded);
}

// c x n right factor of S* = H R with
//   R = (1/beta) Q^T - (1/beta^2) Q^T H (I_c + (1/beta) H^T H)^{-1} H^T.
inline DenseMatrix s_star_right_factor(const DenseMatrix& h, const DenseMatrix& q,
                                       const WoodburyInverse& inv) {
  const double beta = inv.beta();
  const DenseMatrix qth = q.transpose() * h;                  // c x c
  const DenseMatrix mid = qth * inv.core_inverse();           // c x c
  DenseMatrix r = q.transpose() / beta;
  r.noalias() -= (mid * h.transpose()) / (beta * beta);
  return r;
}

// Number of entries kept out of `total` at a keep fraction.
inline std::int64_t keep_count(std::int64_t total, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw ConfigError("keep_fraction must lie in (0, 1]");
  const auto k = static_cast<std::int64_t>(std::llround(keep_fraction * static_cast<double>(total)));
  return std::clamp<std::int64_t>(k, total > 0 ? 1 : 0, total);
}

// Threshold at the keep_count-th largest absolute value; entries below it
// become structural zeros, retained values are unchanged.
inline double sparsify_threshold(std::vector<double> abs_values, double keep_fraction) {
  const auto total = static_cast<std::int64_t>(abs_values.size());
  const auto k = keep_count(total, keep_fraction);
  if (k == 0) return 0.0;
  auto nth = abs_values.begin() + (k - 1);
  std::nth_element(abs_values.begin(), nth, abs_values.end(), std::greater<>());
  return *nth;
}

inline CsrMatrix sparsify(const DenseMatrix& s, double keep_fraction, double* threshold_out = nullptr) {
  std::vector<double> abs_values(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) abs_values[static_cast<std::size_t>(i)] = std::abs(s.data()[i]);
  const double t = sparsify_threshold(std::move(abs_values), keep_fraction);
  if (threshold_out) *threshold_out = t;
  std::vector<Triplet> ts;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (std::abs(s(i, j)) >= t) ts.push_back({i, j, s(i, j)});
  return CsrMatrix::from_triplets(s.rows(), s.cols(), std::move(ts));
}

struct BuildStats {
  std::vector<double> iteration_seconds;
  std::vector<double> q_frobenius;  // ||Q^(i)||_F after clamping
  double assembly_seconds = 0.0;
  double threshold = 0.0;
  std::int64_t kept = 0;
  std::int64_t negative_dropped = 0;
  double density = 0.0;
  double beta = 0.0;
};

struct EluGraphResult {
  CsrMatrix s_sparse;
  DenseMatrix s_dense;  // only when EluGraphConfig::keep_dense
  DenseMatrix q_final;
  DenseMatrix y_expanded;
  std::vector<NodeId> expanded_label_rows;
  BuildStats stats;
};

using QObserver = std::function<void(int iteration, const DenseMatrix& q)>;

namespace detail {

// Monotone bucket of a non-negative double: exponent plus the top 8 mantissa bits.
inline std::uint32_t magnitude_bucket(double a) {
  return static_cast<std::uint32_t>(std::bit_cast<std::uint64_t>(a) >> 44);
}
inline constexpr std::size_t kMagnitudeBuckets = std::size_t{1} << 19;

}  // namespace detail

// Blockwise assembly of S* = H R with an exact top-k threshold. Three
// streamed passes: a magnitude histogram locates the boundary bucket, the
// second pass selects the threshold among that bucket's values, the third
// writes the surviving entries straight into CSR arrays. Peak memory is
// O(n c + block n + kept).
inline CsrMatrix assemble_sparse_s_star(const DenseMatrix& h, const DenseMatrix& right,
                                        const EluGraphConfig& cfg, BuildStats& stats,
                                        DenseMatrix* dense_out = nullptr) {
  const Eigen::Index n = h.rows();
  const Eigen::Index block = std::max<Eigen::Index>(1, cfg.block_rows);
  const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n);
  const std::int64_t k = keep_count(total, cfg.keep_fraction);
  if (dense_out) *dense_out = DenseMatrix(n, n);

  std::vector<std::uint64_t> hist(detail::kMagnitudeBuckets, 0);
  for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
    const Eigen::Index rows = std::min(block, n - r0);
    const DenseMatrix part = h.middleRows(r0, rows) * right;
    for (Eigen::Index i = 0; i < part.size(); ++i)
      ++hist[detail::magnitude_bucket(std::abs(part.data()[i]))];
    if (dense_out) dense_out->middleRows(r0, rows) = part;
  }
  std::uint32_t boundary = 0;
  std::int64_t above = 0;  // entries in buckets strictly above the boundary
  for (std::size_t b = detail::kMagnitudeBuckets; b-- > 0;) {
    if (above + static_cast<std::int64_t>(hist[b]) >= k) {
      boundary = static_cast<std::uint32_t>(b);
      break;
    }
    above += static_cast<std::int64_t>(hist[b]);
  }

  std::vector<double> boundary_values;
  boundary_values.reserve(static_cast<std::size_t>(hist[boundary]));
  for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
    const Eigen::Index rows = std::min(block, n - r0);
    const DenseMatrix part = h.middleRows(r0, rows) * right;
    for (Eigen::Index i = 0; i < part.size(); ++i) {
      const double a = std::abs(part.data()[i]);
      if (detail::magnitude_bucket(a) == boundary) boundary_values.push_back(a);
    }
  }
  const auto need = k - above;  // how many boundary-bucket values survive
  double threshold = 0.0;
  if (need > 0 && !boundary_values.empty()) {
    auto nth = boundary_values.begin() + (need - 1);
    std::nth_element(boundary_values.begin(), nth, boundary_values.end(), std::greater<>());
    threshold = *nth;
  }
  const auto survivors = static_cast<std::size_t>(above) +
                         static_cast<std::size_t>(std::count_if(boundary_values.begin(), boundary_values.end(),
                                                                [&](double a) { return a >= threshold; }));

  std::vector<std::int64_t> row_ptr(static_cast<std::size_t>(n) + 1, 0), col_idx;
  std::vector<double> values;
  col_idx.reserve(survivors);
  values.reserve(survivors);
  std::int64_t negative_dropped = 0;
  for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
    const Eigen::Index rows = std::min(block, n - r0);
    const DenseMatrix part = h.middleRows(r0, rows) * right;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = part(i, j);
        if (std::abs(v) < threshold || detail::magnitude_bucket(std::abs(v)) < boundary) continue;
        if (cfg.clip_negative && v < 0.0) {
          ++negative_dropped;
          continue;
        }
        col_idx.push_back(j);
        values.push_back(v);
      }
      row_ptr[static_cast<std::size_t>(r0 + i) + 1] = static_cast<std::int64_t>(col_idx.size());
    }
  }
  if (cfg.clip_negative) stats.negative_dropped = negative_dropped;
  stats.threshold = threshold;
  stats.kept = static_cast<std::int64_t>(values.size());
  stats.density = total > 0 ? static_cast<double>(values.size()) / static_cast<double>(total) : 0.0;
  return CsrMatrix::from_csr(n, n, std::move(row_ptr), std::move(col_idx), std::move(values));
}

// Q^(0) = Y_expanded; k clamped Woodbury updates; S* assembled once from Q^(k)
// and sparsified.
inline EluGraphResult build_elu_graph(const DenseMatrix& h, ExpandedLabels expanded,
                                      const EluGraphConfig& cfg, const QObserver& observer = {}) {
  if (cfg.k < 1) throw ConfigError("build_elu_graph: k must be >= 1");
  require_shape(h.rows() == expanded.y.rows() && h.cols() == expanded.y.cols(),
                "build_elu_graph: H and Y differ in shape");
  if (cfg.keep_dense && h.rows() > kClosedFormMaxNodes)
    throw ConfigError("build_elu_graph: keep_dense is limited to n <= " +
                      std::to_string(kClosedFormMaxNodes));
  using clock = std::chrono::steady_clock;
  EluGraphResult res;
  res.stats.beta = resolved_beta(cfg, h.rows(), h.cols());
  const WoodburyInverse inv(h, res.stats.beta);
  DenseMatrix q = expanded.y;
  if (observer) observer(0, q);
  for (int i = 1; i <= cfg.k; ++i) {
    const auto t0 = clock::now();
    q = q_update(h, inv, q, expanded.clamp_set, expanded.y);
    res.stats.iteration_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    if (!q.allFinite())
      throw NumericError("build_elu_graph: Q became non-finite at iteration " + std::to_string(i));
    res.stats.q_frobenius.push_back(q.norm());
    if (observer) observer(i, q);
  }
  const auto t0 = clock::now();
  const DenseMatrix right = s_star_right_factor(h, q, inv);
  res.s_sparse = assemble_sparse_s_star(h, right, cfg, res.stats, cfg.keep_dense ? &res.s_dense : nullptr);
  res.stats.assembly_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  res.q_final = std::move(q);
  res.y_expanded = std::move(expanded.y);
  res.expanded_label_rows = std::move(expanded.clamp_set);
  return res;
}

inline EluGraphResult build_elu_graph(const DenseMatrix& h, const LabelSet& labels,
                                      const EluPartition& p, const DenseMatrix& gcn_probs,
                                      const EluGraphConfig& cfg, const QObserver& observer = {}) {
  return build_elu_graph(h, expand_labels(labels, p, gcn_probs), cfg, observer);
}

// ||Q - S H||_F^2 + beta ||S||_F^2
inline double ridge_objective(const DenseMatrix& s, const DenseMatrix& h, const DenseMatrix& q,
                              double beta) {
  return (q - s * h).squaredNorm() + beta * s.squaredNorm();
}

// Fraction of |S| mass on node pairs that share a class.
inline double intra_class_mass_fraction(const CsrMatrix& s, const std::vector<int>& classes) {
  CompensatedSum intra, all;
  s.for_each([&](std::int64_t r, std::int64_t c, double v) {
    const double a = std::abs(v);
    all.add(a);
    if (classes[static_cast<std::size_t>(r)] == classes[static_cast<std::size_t>(c)]) intra.add(a);
  });
  return all.value() > 0 ? intra.value() / all.value() : 0.0;
}

}  // namespace elugcn
