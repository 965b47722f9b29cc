#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "elugcn/graph.hpp"
#include "elugcn/propagation.hpp"
#include "elugcn/text_io.hpp"

namespace elugcn {

// Unlabeled (non-train) nodes split by whether the GCN prediction agrees with
// label propagation. Nodes label propagation never reached are kept apart in
// `no_signal`.
struct EluPartition {
  std::vector<NodeId> v_elu;
  std::vector<NodeId> v_nelu;
  std::vector<NodeId> no_signal;
  std::vector<int> gcn_pred;
  std::vector<int> lpa_pred;

  // NELU as used by the contrastive objective: disagreeing plus unreached nodes.
  std::vector<NodeId> nelu_with_no_signal() const {
    std::vector<NodeId> out = v_nelu;
    out.insert(out.end(), no_signal.begin(), no_signal.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  bool operator==(const EluPartition&) const = default;
};

inline EluPartition partition(const std::vector<int>& gcn_pred, const std::vector<int>& lpa_pred,
                              const LabelSet& labels) {
  const auto n = static_cast<std::size_t>(labels.num_nodes());
  if (gcn_pred.size() != n || lpa_pred.size() != n)
    throw ShapeError("partition: prediction arrays must have one entry per node");
  std::vector<char> is_train(n, 0);
  for (NodeId v : labels.train) is_train[static_cast<std::size_t>(v)] = 1;

  EluPartition p;
  p.gcn_pred = gcn_pred;
  p.lpa_pred = lpa_pred;
  for (std::size_t v = 0; v < n; ++v) {
    if (is_train[v]) continue;
    const auto id = static_cast<NodeId>(v);
    if (lpa_pred[v] == kNoSignal)
      p.no_signal.push_back(id);
    else if (lpa_pred[v] == gcn_pred[v])
      p.v_elu.push_back(id);
    else
      p.v_nelu.push_back(id);
  }
  return p;
}

struct PartitionReport {
  double proportion_elu = 0.0;
  double proportion_nelu = 0.0;
  double proportion_no_signal = 0.0;
  std::optional<double> acc_elu;
  std::optional<double> acc_nelu;
  std::size_t eval_elu = 0;
  std::size_t eval_nelu = 0;
};

// Proportions are over all unlabeled nodes; accuracies (of the GCN
// prediction) only over `eval_nodes` that carry a ground-truth class.
inline PartitionReport partition_report(const EluPartition& p, const LabelSet& truth,
                                        const std::vector<NodeId>& eval_nodes) {
  PartitionReport r;
  const double total =
      static_cast<double>(p.v_elu.size() + p.v_nelu.size() + p.no_signal.size());
  if (total > 0) {
    r.proportion_elu = static_cast<double>(p.v_elu.size()) / total;
    r.proportion_nelu = static_cast<double>(p.v_nelu.size()) / total;
    r.proportion_no_signal = static_cast<double>(p.no_signal.size()) / total;
  }
  const std::set<NodeId> eval(eval_nodes.begin(), eval_nodes.end());
  auto accuracy = [&](const std::vector<NodeId>& members, std::size_t& count) {
    std::size_t correct = 0;
    count = 0;
    for (NodeId v : members) {
      const int t = truth.labels[static_cast<std::size_t>(v)];
      if (!eval.count(v) || t == kUnlabeled) continue;
      ++count;
      if (p.gcn_pred[static_cast<std::size_t>(v)] == t) ++correct;
    }
    return count == 0 ? std::nullopt
                      : std::optional<double>(static_cast<double>(correct) /
                                              static_cast<double>(count));
  };
  r.acc_elu = accuracy(p.v_elu, r.eval_elu);
  r.acc_nelu = accuracy(p.v_nelu, r.eval_nelu);
  return r;
}

inline PartitionReport partition_report(const EluPartition& p, const LabelSet& truth) {
  return partition_report(p, truth, truth.test);
}

// CSV: node_id,gcn_pred,lpa_pred,set with set in {ELU,NELU,NOSIG}; an
// unreached node's lpa_pred is written as -1.
inline std::string partition_csv(const EluPartition& p) {
  struct Row {
    NodeId v;
    const char* set;
  };
  std::vector<Row> rows;
  for (NodeId v : p.v_elu) rows.push_back({v, "ELU"});
  for (NodeId v : p.v_nelu) rows.push_back({v, "NELU"});
  for (NodeId v : p.no_signal) rows.push_back({v, "NOSIG"});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.v < b.v; });
  std::string out = "node_id,gcn_pred,lpa_pred,set\n";
  for (const auto& r : rows) {
    const int lpa = p.lpa_pred[static_cast<std::size_t>(r.v)];
    out += std::to_string(r.v) + ',' + std::to_string(p.gcn_pred[static_cast<std::size_t>(r.v)]) +
           ',' + std::to_string(lpa == kNoSignal ? -1 : lpa) + ',' + r.set + '\n';
  }
  return out;
}

// Inverse of partition_csv. Train nodes are absent from the file; their
// prediction slots are filled with kUnlabeled.
inline EluPartition parse_partition_csv(const std::string& text, std::int64_t n) {
  EluPartition p;
  p.gcn_pred.assign(static_cast<std::size_t>(n), kUnlabeled);
  p.lpa_pred.assign(static_cast<std::size_t>(n), kUnlabeled);
  std::size_t line_no = 0;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    const auto v = f.size() == 4 ? parse_int(f[0]) : std::nullopt;
    const auto g = f.size() == 4 ? parse_int(f[1]) : std::nullopt;
    const auto l = f.size() == 4 ? parse_int(f[2]) : std::nullopt;
    if (!v || !g || !l || *v < 0 || *v >= n)
      throw ConfigError("partition csv: malformed line " + std::to_string(line_no));
    p.gcn_pred[static_cast<std::size_t>(*v)] = static_cast<int>(*g);
    p.lpa_pred[static_cast<std::size_t>(*v)] = *l < 0 ? kNoSignal : static_cast<int>(*l);
    if (f[3] == "ELU")
      p.v_elu.push_back(*v);
    else if (f[3] == "NELU")
      p.v_nelu.push_back(*v);
    else if (f[3] == "NOSIG")
      p.no_signal.push_back(*v);
    else
      throw ConfigError("partition csv: unknown set '" + std::string(f[3]) + "'");
  }
  return p;
}

}  // namespace elugcn
