#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "elugcn/numerics.hpp"
#include "elugcn/sparse.hpp"

namespace elugcn {

using NodeId = std::int64_t;

struct Edge {
  NodeId src;
  NodeId dst;
  double weight = 1.0;

  bool operator==(const Edge&) const = default;
};

// Undirected weighted graph stored as arcs in both directions, sorted by
// (src, dst), duplicates merged by summing weights.
class SparseGraph {
 public:
  SparseGraph() = default;

  // Mirrors every edge; a self-loop (i, i) contributes a single arc.
  static SparseGraph from_edges(std::int64_t n, const std::vector<Edge>& edges) {
    std::vector<Triplet> ts;
    ts.reserve(edges.size() * 2);
    for (const auto& e : edges) {
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
        throw ShapeError("SparseGraph: edge endpoint out of range");
      if (!std::isfinite(e.weight) || e.weight < 0.0)
        throw ShapeError("SparseGraph: edge weight must be finite and >= 0");
      ts.push_back({e.src, e.dst, e.weight});
      if (e.src != e.dst) ts.push_back({e.dst, e.src, e.weight});
    }
    SparseGraph g;
    g.n_ = n;
    g.adj_ = CsrMatrix::from_triplets(n, n, std::move(ts));
    return g;
  }

  std::int64_t num_nodes() const { return n_; }
  std::size_t num_arcs() const { return adj_.nnz(); }
  const CsrMatrix& adjacency() const { return adj_; }

  std::vector<Edge> arcs() const {
    std::vector<Edge> out;
    out.reserve(adj_.nnz());
    adj_.for_each([&](std::int64_t r, std::int64_t c, double v) { out.push_back({r, c, v}); });
    return out;
  }

  // Each undirected edge once (src <= dst).
  std::vector<Edge> undirected_edges() const {
    std::vector<Edge> out;
    adj_.for_each([&](std::int64_t r, std::int64_t c, double v) {
      if (r <= c) out.push_back({r, c, v});
    });
    return out;
  }

  bool operator==(const SparseGraph&) const = default;

 private:
  std::int64_t n_ = 0;
  CsrMatrix adj_;
};

// D̃^{-1/2} (A + I) D̃^{-1/2} with the sparsity pattern of A + I.
struct NormalizedAdjacency {
  CsrMatrix matrix;

  std::int64_t num_nodes() const { return matrix.rows(); }
  DenseMatrix multiply(const DenseMatrix& x) const { return matrix.multiply(x); }
};

inline NormalizedAdjacency normalize(const SparseGraph& g) {
  const std::int64_t n = g.num_nodes();
  std::vector<Triplet> ts;
  ts.reserve(g.num_arcs() + static_cast<std::size_t>(n));
  g.adjacency().for_each(
      [&](std::int64_t r, std::int64_t c, double v) { ts.push_back({r, c, v}); });
  for (std::int64_t i = 0; i < n; ++i) ts.push_back({i, i, 1.0});
  CsrMatrix tilde = CsrMatrix::from_triplets(n, n, std::move(ts));

  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t r = 0; r < n; ++r) {
    CompensatedSum d;
    for (auto k = tilde.row_ptr()[static_cast<std::size_t>(r)];
         k < tilde.row_ptr()[static_cast<std::size_t>(r) + 1]; ++k)
      d.add(tilde.values()[static_cast<std::size_t>(k)]);
    inv_sqrt_deg[static_cast<std::size_t>(r)] = 1.0 / std::sqrt(d.value());
  }
  auto& vals = tilde.mutable_values();
  for (std::int64_t r = 0; r < n; ++r)
    for (auto k = tilde.row_ptr()[static_cast<std::size_t>(r)];
         k < tilde.row_ptr()[static_cast<std::size_t>(r) + 1]; ++k) {
      const auto c = tilde.col_idx()[static_cast<std::size_t>(k)];
      vals[static_cast<std::size_t>(k)] *=
          inv_sqrt_deg[static_cast<std::size_t>(r)] * inv_sqrt_deg[static_cast<std::size_t>(c)];
    }
  return NormalizedAdjacency{std::move(tilde)};
}

inline constexpr int kUnlabeled = -1;

struct LabelSet {
  std::vector<int> labels;  // class index or kUnlabeled
  int num_classes = 0;
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  std::int64_t num_nodes() const { return static_cast<std::int64_t>(labels.size()); }

  // n x c; one-hot rows for train nodes, zero rows elsewhere.
  DenseMatrix onehot() const {
    DenseMatrix y = DenseMatrix::Zero(num_nodes(), num_classes);
    for (NodeId v : train) y(v, labels[static_cast<std::size_t>(v)]) = 1.0;
    return y;
  }

  // Returns a description of the first violated invariant, if any.
  std::optional<std::string> violation() const {
    const auto n = num_nodes();
    for (int l : labels)
      if (l != kUnlabeled && (l < 0 || l >= num_classes)) return "label out of class range";
    std::set<NodeId> seen;
    for (const auto* split : {&train, &val, &test}) {
      std::set<NodeId> local;
      for (NodeId v : *split) {
        if (v < 0 || v >= n) return "split index " + std::to_string(v) + " out of range";
        if (!local.insert(v).second) return "split index " + std::to_string(v) + " repeated";
        if (!seen.insert(v).second)
          return "node " + std::to_string(v) + " appears in more than one split";
      }
    }
    for (NodeId v : train)
      if (labels[static_cast<std::size_t>(v)] == kUnlabeled)
        return "train node " + std::to_string(v) + " has no label";
    return std::nullopt;
  }

  bool operator==(const LabelSet&) const = default;
};

struct Dataset {
  SparseGraph graph;
  DenseMatrix features;  // n x d
  LabelSet labels;
};

}  // namespace elugcn
