#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "elugcn/graph.hpp"
#include "elugcn/rng.hpp"

namespace elugcn {

struct SbmOptions {
  std::int64_t n_per_class = 100;
  int num_classes = 4;
  double p_in = 0.1;
  double p_out = 0.01;
  std::int64_t feat_dim = 16;
  double feat_shift = 1.0;
  std::int64_t train_per_class = 20;
  std::int64_t val_count = -1;  // -1: a quarter of the nodes
  std::uint64_t seed = 0;
};

// Planted-partition graph. Node v belongs to class v / n_per_class; features
// are unit Gaussian noise plus feat_shift along the class's own axis. The
// remaining nodes after the per-class train draw are shuffled into val, then
// test.
inline Dataset gen_sbm(const SbmOptions& opt) {
  if (!(opt.p_in >= 0.0 && opt.p_in <= 1.0 && opt.p_out >= 0.0 && opt.p_out <= 1.0))
    throw ConfigError("gen_sbm: probabilities must lie in [0, 1]");
  if (opt.p_in == opt.p_out)
    throw ConfigError("gen_sbm: p_in == p_out plants no community structure");
  if (opt.num_classes < 1 || opt.n_per_class < 1)
    throw ConfigError("gen_sbm: need at least one class and one node per class");
  if (opt.feat_dim < opt.num_classes)
    throw ConfigError("gen_sbm: feat_dim must be >= number of classes");
  if (opt.train_per_class < 1 || opt.train_per_class > opt.n_per_class)
    throw ConfigError("gen_sbm: train_per_class must lie in [1, n_per_class]");

  const std::int64_t c = opt.num_classes;
  const std::int64_t n = opt.n_per_class * c;
  Rng graph_rng(sub_seed(opt.seed, "sbm.graph"));
  Rng feat_rng(sub_seed(opt.seed, "sbm.features"));
  Rng split_rng(sub_seed(opt.seed, "sbm.split"));

  Dataset ds;
  ds.labels.num_classes = static_cast<int>(c);
  ds.labels.labels.resize(static_cast<std::size_t>(n));
  for (std::int64_t v = 0; v < n; ++v)
    ds.labels.labels[static_cast<std::size_t>(v)] = static_cast<int>(v / opt.n_per_class);

  std::vector<Edge> edges;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) {
      const bool same = ds.labels.labels[static_cast<std::size_t>(i)] ==
                        ds.labels.labels[static_cast<std::size_t>(j)];
      if (graph_rng.uniform() < (same ? opt.p_in : opt.p_out)) edges.push_back({i, j, 1.0});
    }
  ds.graph = SparseGraph::from_edges(n, edges);

  ds.features = DenseMatrix::Zero(n, opt.feat_dim);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < opt.feat_dim; ++j) ds.features(i, j) = feat_rng.normal();
    ds.features(i, ds.labels.labels[static_cast<std::size_t>(i)]) += opt.feat_shift;
  }

  auto shuffle = [&](std::vector<NodeId>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(split_rng.below(i))]);
  };
  std::vector<NodeId> rest;
  for (std::int64_t k = 0; k < c; ++k) {
    std::vector<NodeId> members(static_cast<std::size_t>(opt.n_per_class));
    std::iota(members.begin(), members.end(), k * opt.n_per_class);
    shuffle(members);
    for (std::int64_t t = 0; t < opt.n_per_class; ++t)
      (t < opt.train_per_class ? ds.labels.train : rest).push_back(members[static_cast<std::size_t>(t)]);
  }
  std::sort(ds.labels.train.begin(), ds.labels.train.end());
  shuffle(rest);
  const std::int64_t val_count =
      std::min<std::int64_t>(opt.val_count < 0 ? n / 4 : opt.val_count,
                             static_cast<std::int64_t>(rest.size()));
  ds.labels.val.assign(rest.begin(), rest.begin() + val_count);
  ds.labels.test.assign(rest.begin() + val_count, rest.end());
  std::sort(ds.labels.val.begin(), ds.labels.val.end());
  std::sort(ds.labels.test.begin(), ds.labels.test.end());
  return ds;
}

// Newman modularity of a hard partition on an undirected weighted graph.
inline double modularity(const SparseGraph& g, const std::vector<int>& community) {
  const std::int64_t n = g.num_nodes();
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  CompensatedSum two_m;
  g.adjacency().for_each([&](std::int64_t r, std::int64_t, double w) {
    degree[static_cast<std::size_t>(r)] += w;
    two_m.add(w);
  });
  const double m2 = two_m.value();
  if (m2 == 0.0) return 0.0;
  int k = 0;
  for (int cidx : community) k = std::max(k, cidx + 1);
  std::vector<double> within(static_cast<std::size_t>(k), 0.0), tot(static_cast<std::size_t>(k), 0.0);
  g.adjacency().for_each([&](std::int64_t r, std::int64_t col, double w) {
    if (community[static_cast<std::size_t>(r)] == community[static_cast<std::size_t>(col)])
      within[static_cast<std::size_t>(community[static_cast<std::size_t>(r)])] += w;
  });
  for (std::int64_t v = 0; v < n; ++v)
    tot[static_cast<std::size_t>(community[static_cast<std::size_t>(v)])] += degree[static_cast<std::size_t>(v)];
  CompensatedSum q;
  for (int a = 0; a < k; ++a) {
    const double t = tot[static_cast<std::size_t>(a)] / m2;
    q.add(within[static_cast<std::size_t>(a)] / m2 - t * t);
  }
  return q.value();
}

}  // namespace elugcn
