#pragma once

#include <concepts>
#include <functional>
#include <vector>

#include "elugcn/graph.hpp"

namespace elugcn {

inline constexpr int kNoSignal = -2;
inline constexpr std::int64_t kInfluenceOracleMaxNodes = 20;

template <typename Op>
concept PropagationOperator = requires(const Op& op, const DenseMatrix& x) {
  { op.multiply(x) } -> std::convertible_to<DenseMatrix>;
};

// Dense n x n matrix viewed as a propagation operator.
struct DenseOperator {
  const DenseMatrix& matrix;
  DenseMatrix multiply(const DenseMatrix& x) const {
    require_shape(matrix.cols() == x.rows(), "DenseOperator: inner dimension mismatch");
    return matrix * x;
  }
  std::int64_t num_nodes() const { return matrix.rows(); }
};

struct PropagationState {
  DenseMatrix q;
  int step = 0;
  std::vector<NodeId> clamped;
};

using PropagationObserver = std::function<void(const PropagationState&)>;

// Overwrites the clamped rows of q with the matching rows of target.
inline void clamp_rows(DenseMatrix& q, const DenseMatrix& target, const std::vector<NodeId>& rows) {
  for (NodeId v : rows) q.row(v) = target.row(v);
}

// k multiply-then-clamp steps starting from Q^(0) = Y.
template <PropagationOperator Op>
PropagationState lpa(const Op& op, const DenseMatrix& y, const std::vector<NodeId>& clamped,
                     int k, const PropagationObserver& observer = {}) {
  if (k < 1) throw ConfigError("lpa: k must be >= 1");
  for (NodeId v : clamped)
    require_shape(v >= 0 && v < y.rows(), "lpa: clamped index out of range");
  PropagationState state{y, 0, clamped};
  for (int i = 1; i <= k; ++i) {
    DenseMatrix next = op.multiply(state.q);
    require_shape(next.rows() == y.rows() && next.cols() == y.cols(),
                  "lpa: operator output shape differs from Y");
    clamp_rows(next, y, clamped);
    state.q = std::move(next);
    state.step = i;
    if (observer) observer(state);
  }
  return state;
}

// Argmax class per node (ties to the lowest class); all-zero rows get kNoSignal.
inline std::vector<int> lpa_predict(const PropagationState& state) {
  std::vector<int> out(static_cast<std::size_t>(state.q.rows()));
  for (Eigen::Index i = 0; i < state.q.rows(); ++i) {
    const auto row = state.q.row(i);
    out[static_cast<std::size_t>(i)] =
        (row.array() == 0.0).all() ? kNoSignal : static_cast<int>(argmax_lowest(row));
  }
  return out;
}

// Brute-force influence of the labeled nodes of class `cls` on `target`:
// sum over every length-k walk target -> ... -> labeled node of the product of
// normalized edge weights. The self-loops of Â let a walk pause, so shorter
// paths are covered by walks that stay in place for the remaining steps.
inline double influence_oracle(const NormalizedAdjacency& a_hat, const LabelSet& labels,
                               NodeId target, int cls, int k) {
  const std::int64_t n = a_hat.num_nodes();
  if (n > kInfluenceOracleMaxNodes)
    throw ConfigError("influence_oracle: graph has " + std::to_string(n) +
                      " nodes, enumeration is limited to " +
                      std::to_string(kInfluenceOracleMaxNodes));
  if (k < 1) throw ConfigError("influence_oracle: k must be >= 1");
  std::vector<char> is_source(static_cast<std::size_t>(n), 0);
  bool any = false;
  for (NodeId v : labels.train)
    if (labels.labels[static_cast<std::size_t>(v)] == cls) {
      is_source[static_cast<std::size_t>(v)] = 1;
      any = true;
    }
  if (!any) return 0.0;

  const auto& m = a_hat.matrix;
  CompensatedSum total;
  std::function<void(NodeId, int, double)> walk = [&](NodeId at, int remaining, double weight) {
    if (remaining == 0) {
      if (is_source[static_cast<std::size_t>(at)]) total.add(weight);
      return;
    }
    for (auto p = m.row_ptr()[static_cast<std::size_t>(at)];
         p < m.row_ptr()[static_cast<std::size_t>(at) + 1]; ++p)
      walk(m.col_idx()[static_cast<std::size_t>(p)], remaining - 1,
           weight * m.values()[static_cast<std::size_t>(p)]);
  };
  walk(target, k, 1.0);
  return total.value();
}

inline double influence_oracle(const SparseGraph& g, const LabelSet& labels, NodeId target,
                               int cls, int k) {
  return influence_oracle(normalize(g), labels, target, cls, k);
}

}  // namespace elugcn
