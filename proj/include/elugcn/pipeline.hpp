#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "elugcn/config.hpp"
#include "elugcn/dataset_io.hpp"
#include "elugcn/metrics.hpp"

namespace elugcn {

namespace fs = std::filesystem;

// Artifact file names inside a work directory, with the subcommand that
// produces each.
namespace artifact {
inline constexpr const char* mlp_checkpoint = "mlp.ckpt";
inline constexpr const char* mlp_history = "mlp_history.csv";
inline constexpr const char* mlp_report = "mlp_report.csv";
inline constexpr const char* baseline_checkpoint = "gcn_baseline.ckpt";
inline constexpr const char* baseline_history = "gcn_baseline_history.csv";
inline constexpr const char* partition = "partition.csv";
inline constexpr const char* partition_report = "partition_report.csv";
inline constexpr const char* s_star = "s_star.triplets";
inline constexpr const char* s_star_stats = "s_star.stats";
inline constexpr const char* s_star_timing = "s_star.timing.csv";
inline constexpr const char* elugcn_checkpoint = "elugcn.ckpt";
inline constexpr const char* train_history = "train_history.csv";
inline constexpr const char* train_report = "train_report.csv";
inline constexpr const char* eval_report = "eval_report.csv";
}  // namespace artifact

inline void require_artifact(const fs::path& p, const char* producer) {
  if (!fs::exists(p))
    throw MissingArtifactError("missing " + p.string() + "; run `elugcn " + producer + "` first");
}

// metric,value rows preceded by the effective configuration as comments.
class Report {
 public:
  explicit Report(const PipelineConfig& cfg) : text_(config_text(cfg, "# ") + "metric,value\n") {}

  Report& add(const std::string& metric, double v) {
    text_ += metric + ',' + format_double(v) + '\n';
    return *this;
  }
  Report& add(const std::string& metric, const std::optional<double>& v) {
    text_ += metric + ',' + (v ? format_double(*v) : std::string("NA")) + '\n';
    return *this;
  }
  Report& add(const std::string& metric, const std::string& v) {
    text_ += metric + ',' + v + '\n';
    return *this;
  }
  const std::string& text() const { return text_; }
  void write(const fs::path& p) const { write_text_file(p, text_); }

 private:
  std::string text_;
};

inline std::string history_csv(const std::vector<EpochRecord>& h,
                               const std::vector<double>* objective = nullptr) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,gap";
  out += objective ? ",objective\n" : "\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& r = h[i];
    out += std::to_string(r.epoch) + ',' + format_double(r.train_loss) + ',' +
           format_double(r.val_loss) + ',' + format_double(r.train_acc) + ',' +
           format_double(r.val_acc) + ',' + format_double(std::abs(r.val_loss - r.train_loss));
    if (objective) out += ',' + format_double((*objective)[i]);
    out += '\n';
  }
  return out;
}

inline std::vector<EpochRecord> parse_history_csv(const fs::path& p) {
  std::vector<EpochRecord> h;
  const auto lines = read_lines(p);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char ch : lines[i]) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    f.push_back(cur);
    if (f.size() < 5) throw ConfigError(p.string() + ":" + std::to_string(i + 1) + ": malformed history row");
    EpochRecord r;
    r.epoch = static_cast<int>(parse_int(f[0]).value_or(0));
    r.train_loss = parse_double(f[1]).value_or(0.0);
    r.val_loss = parse_double(f[2]).value_or(0.0);
    r.train_acc = parse_double(f[3]).value_or(0.0);
    r.val_acc = parse_double(f[4]).value_or(0.0);
    h.push_back(r);
  }
  return h;
}

// "i j value" per line.
inline std::string triplets_text(const CsrMatrix& s) {
  std::string out;
  out.reserve(s.nnz() * 28);
  s.for_each([&](std::int64_t r, std::int64_t c, double v) {
    out += std::to_string(r);
    out += ' ';
    out += std::to_string(c);
    out += ' ';
    out += format_double(v);
    out += '\n';
  });
  return out;
}

inline CsrMatrix load_triplets(const fs::path& p, std::int64_t n) {
  std::vector<Triplet> ts;
  const auto lines = read_lines(p);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tok = split_ws(strip_comment(lines[i]));
    if (tok.empty()) continue;
    const auto r = tok.size() == 3 ? parse_int(tok[0]) : std::nullopt;
    const auto c = tok.size() == 3 ? parse_int(tok[1]) : std::nullopt;
    const auto v = tok.size() == 3 ? parse_double(tok[2]) : std::nullopt;
    if (!r || !c || !v || *r < 0 || *r >= n || *c < 0 || *c >= n || !std::isfinite(*v))
      throw ConfigError(p.string() + ":" + std::to_string(i + 1) + ": malformed triplet");
    ts.push_back({*r, *c, *v});
  }
  return CsrMatrix::from_triplets(n, n, std::move(ts));
}

struct MlpStep {
  MlpTrainResult result;
  double test_acc = 0.0;
};

inline MlpStep run_pretrain_mlp(const PipelineConfig& cfg, const Dataset& ds, const fs::path& work,
                                std::ostream& log) {
  MlpStep step;
  step.result = pretrain_mlp(ds.features, ds.labels, cfg.mlp_config());
  const auto pred = argmax_rows(mlp_forward(step.result.model, ds.features).logits);
  step.test_acc = accuracy(pred, ds.labels.labels, ds.labels.test);
  save_checkpoint(work / artifact::mlp_checkpoint, to_checkpoint(step.result.model));
  write_text_file(work / artifact::mlp_history, history_csv(step.result.history));
  Report(cfg)
      .add("best_epoch", static_cast<double>(step.result.best_epoch))
      .add("val_acc", step.result.history.empty() ? 0.0 : step.result.history[static_cast<std::size_t>(step.result.best_epoch)].val_acc)
      .add("test_acc", step.test_acc)
      .write(work / artifact::mlp_report);
  log << "pretrain-mlp: best epoch " << step.result.best_epoch << ", test acc " << step.test_acc << '\n';
  return step;
}

struct PartitionStep {
  GcnTrainResult baseline;
  PropagationState lpa_state;
  EluPartition partition;
  PartitionReport report;
  double baseline_test_acc = 0.0;
  GeneralizationGap baseline_gap;
};

inline PartitionStep run_partition(const PipelineConfig& cfg, const Dataset& ds, const fs::path& work,
                                   std::ostream& log) {
  PartitionStep step;
  const auto a_hat = normalize(ds.graph);
  const auto gcfg = cfg.gcn_config();
  step.baseline = train_single(init_gcn(ds.features.cols(), gcfg.hidden, ds.labels.num_classes, gcfg.seed),
                               a_hat.matrix, ds.features, ds.labels, gcfg);
  step.baseline_test_acc = accuracy(step.baseline.predictions, ds.labels.labels, ds.labels.test);
  step.baseline_gap = generalization_gap(step.baseline.history);
  step.lpa_state = lpa(a_hat, ds.labels.onehot(), ds.labels.train, cfg.lpa_k);
  step.partition = partition(step.baseline.predictions, lpa_predict(step.lpa_state), ds.labels);
  step.report = partition_report(step.partition, ds.labels);

  save_checkpoint(work / artifact::baseline_checkpoint, to_checkpoint(step.baseline.model));
  write_text_file(work / artifact::baseline_history, history_csv(step.baseline.history));
  write_text_file(work / artifact::partition, partition_csv(step.partition));
  Report(cfg)
      .add("gcn_test_acc", step.baseline_test_acc)
      .add("gcn_best_epoch", static_cast<double>(step.baseline.best_epoch))
      .add("gcn_gap_summary", step.baseline_gap.summary)
      .add("count_elu", static_cast<double>(step.partition.v_elu.size()))
      .add("count_nelu", static_cast<double>(step.partition.v_nelu.size()))
      .add("count_no_signal", static_cast<double>(step.partition.no_signal.size()))
      .add("proportion_nelu", step.report.proportion_nelu)
      .add("proportion_no_signal", step.report.proportion_no_signal)
      .add("acc_elu", step.report.acc_elu)
      .add("acc_nelu", step.report.acc_nelu)
      .write(work / artifact::partition_report);
  log << "partition: GCN test acc " << step.baseline_test_acc << ", |ELU|=" << step.partition.v_elu.size()
      << " |NELU|=" << step.partition.v_nelu.size() << " |NOSIG|=" << step.partition.no_signal.size() << '\n';
  return step;
}

inline EluPartition load_partition(const fs::path& work, std::int64_t n) {
  require_artifact(work / artifact::partition, "partition");
  return parse_partition_csv(read_text_file(work / artifact::partition), n);
}

struct BuildStep {
  EluGraphResult graph;
  double intra_class_mass = 0.0;
};

inline BuildStep run_build_elu_graph(const PipelineConfig& cfg, const Dataset& ds, const fs::path& work,
                                     std::ostream& log) {
  require_artifact(work / artifact::mlp_checkpoint, "pretrain-mlp");
  require_artifact(work / artifact::baseline_checkpoint, "partition");
  const auto mlp = mlp_from_checkpoint(load_checkpoint(work / artifact::mlp_checkpoint));
  const auto baseline = gcn_from_checkpoint(load_checkpoint(work / artifact::baseline_checkpoint));
  const auto part = load_partition(work, ds.labels.num_nodes());
  const auto a_hat = normalize(ds.graph);
  const DenseMatrix h = mlp_probs(mlp, ds.features);
  const DenseMatrix gcn_probs = softmax_rows(forward_single(baseline, a_hat, ds.features));

  BuildStep step;
  step.graph = build_elu_graph(h, ds.labels, part, gcn_probs, cfg.elu);
  step.intra_class_mass = intra_class_mass_fraction(step.graph.s_sparse, ds.labels.labels);
  const auto& st = step.graph.stats;

  write_text_file(work / artifact::s_star, triplets_text(step.graph.s_sparse));
  Report stats(cfg);
  stats.add("n", static_cast<double>(ds.labels.num_nodes()))
      .add("beta", st.beta)
      .add("nnz", static_cast<double>(st.kept))
      .add("density", st.density)
      .add("threshold", st.threshold)
      .add("negative_dropped", static_cast<double>(st.negative_dropped))
      .add("expanded_label_rows", static_cast<double>(step.graph.expanded_label_rows.size()))
      .add("intra_class_mass_fraction", step.intra_class_mass);
  for (std::size_t i = 0; i < st.q_frobenius.size(); ++i)
    stats.add("q_frobenius_" + std::to_string(i + 1), st.q_frobenius[i]);
  stats.write(work / artifact::s_star_stats);
  std::string timing = "stage,iteration,seconds\n";
  for (std::size_t i = 0; i < st.iteration_seconds.size(); ++i)
    timing += "q_update," + std::to_string(i + 1) + ',' + format_double(st.iteration_seconds[i]) + '\n';
  timing += "assembly,0," + format_double(st.assembly_seconds) + '\n';
  write_text_file(work / artifact::s_star_timing, timing);
  log << "build-elu-graph: kept " << st.kept << " entries (threshold " << st.threshold
      << "), intra-class mass " << step.intra_class_mass << '\n';
  return step;
}

struct TrainStep {
  DualTrainResult result;
  double test_acc = 0.0;
  double val_acc = 0.0;
  GeneralizationGap gap;
  PartitionReport partition_after;  // ELU-branch predictions vs LPA on S*
};

inline TrainStep run_train(const PipelineConfig& cfg, const Dataset& ds, const fs::path& work,
                           std::ostream& log) {
  require_artifact(work / artifact::mlp_checkpoint, "pretrain-mlp");
  require_artifact(work / artifact::s_star, "build-elu-graph");
  const auto n = ds.labels.num_nodes();
  const auto part = load_partition(work, n);
  const auto a_hat = normalize(ds.graph);
  const auto s_star = load_triplets(work / artifact::s_star, n);
  if (part.v_elu.empty())
    log << "warning: V_ELU is empty; the contrastive alignment term is zero\n";
  const auto inputs = make_dual_inputs(a_hat.matrix, s_star, ds.features, part);
  const auto gcfg = cfg.gcn_config();
  Rng head_rng(cfg.head_seed());
  TrainStep step;
  step.result = train_dual(init_gcn(ds.features.cols(), gcfg.hidden, ds.labels.num_classes, gcfg.seed),
                           init_projection_head(ds.labels.num_classes, cfg.con.proj_dim, head_rng), inputs,
                           ds.labels, gcfg, cfg.con);
  step.test_acc = accuracy(step.result.predictions, ds.labels.labels, ds.labels.test);
  step.val_acc = accuracy(step.result.predictions, ds.labels.labels, ds.labels.val);
  step.gap = generalization_gap(step.result.history);

  const DenseMatrix elu_logits = branch_forward(step.result.model, inputs.propagated_tilde, a_hat.matrix).logits;
  const auto lpa_after = lpa_predict(lpa(s_star, ds.labels.onehot(), ds.labels.train, cfg.lpa_k));
  step.partition_after = partition_report(partition(argmax_rows(elu_logits), lpa_after, ds.labels), ds.labels);

  save_checkpoint(work / artifact::elugcn_checkpoint, to_checkpoint(step.result.model, step.result.head));
  write_text_file(work / artifact::train_history, history_csv(step.result.history, &step.result.objective));
  Report(cfg)
      .add("test_acc", step.test_acc)
      .add("val_acc", step.val_acc)
      .add("best_epoch", static_cast<double>(step.result.best_epoch))
      .add("gap_summary", step.gap.summary)
      .add("proportion_nelu_after", step.partition_after.proportion_nelu)
      .write(work / artifact::train_report);
  log << "train: ELU-GCN test acc " << step.test_acc << " (best epoch " << step.result.best_epoch << ")\n";
  return step;
}

struct EvalStep {
  double gcn_test_acc = 0.0;
  double elugcn_test_acc = 0.0;
  double mlp_test_acc = 0.0;
  PartitionReport partition;
  double gcn_gap = 0.0;
  double elugcn_gap = 0.0;
  double intra_class_mass = 0.0;
};

// Recomputes every reported metric from saved checkpoints and artifacts.
inline EvalStep run_eval(const PipelineConfig& cfg, const Dataset& ds, const fs::path& work, std::ostream& log) {
  require_artifact(work / artifact::mlp_checkpoint, "pretrain-mlp");
  require_artifact(work / artifact::baseline_checkpoint, "partition");
  require_artifact(work / artifact::s_star, "build-elu-graph");
  require_artifact(work / artifact::elugcn_checkpoint, "train");
  const auto n = ds.labels.num_nodes();
  const auto a_hat = normalize(ds.graph);
  const auto part = load_partition(work, n);
  const auto s_star = load_triplets(work / artifact::s_star, n);
  EvalStep ev;

  const auto mlp = mlp_from_checkpoint(load_checkpoint(work / artifact::mlp_checkpoint));
  ev.mlp_test_acc = accuracy(argmax_rows(mlp_forward(mlp, ds.features).logits), ds.labels.labels, ds.labels.test);
  const auto baseline = gcn_from_checkpoint(load_checkpoint(work / artifact::baseline_checkpoint));
  ev.gcn_test_acc = accuracy(argmax_rows(forward_single(baseline, a_hat, ds.features)), ds.labels.labels,
                             ds.labels.test);
  const auto ck = load_checkpoint(work / artifact::elugcn_checkpoint);
  const auto model = gcn_from_checkpoint(ck);
  const ProjectionHead head{ck.tensor("head")};
  const auto inputs = make_dual_inputs(a_hat.matrix, s_star, ds.features, part);
  const auto pred = predict_dual(model, head, inputs, cfg.con.eta_fuse).predictions;
  ev.elugcn_test_acc = accuracy(pred, ds.labels.labels, ds.labels.test);
  ev.partition = partition_report(part, ds.labels);
  ev.intra_class_mass = intra_class_mass_fraction(s_star, ds.labels.labels);
  if (fs::exists(work / artifact::baseline_history))
    ev.gcn_gap = generalization_gap(parse_history_csv(work / artifact::baseline_history)).summary;
  if (fs::exists(work / artifact::train_history))
    ev.elugcn_gap = generalization_gap(parse_history_csv(work / artifact::train_history)).summary;

  Report(cfg)
      .add("mlp_test_acc", ev.mlp_test_acc)
      .add("gcn_test_acc", ev.gcn_test_acc)
      .add("elugcn_test_acc", ev.elugcn_test_acc)
      .add("proportion_nelu", ev.partition.proportion_nelu)
      .add("acc_elu", ev.partition.acc_elu)
      .add("acc_nelu", ev.partition.acc_nelu)
      .add("intra_class_mass_fraction", ev.intra_class_mass)
      .add("gcn_gap_summary", ev.gcn_gap)
      .add("elugcn_gap_summary", ev.elugcn_gap)
      .write(work / artifact::eval_report);
  log << "eval: MLP " << ev.mlp_test_acc << ", GCN " << ev.gcn_test_acc << ", ELU-GCN " << ev.elugcn_test_acc
      << '\n';
  return ev;
}

struct PipelineRun {
  MlpStep mlp;
  PartitionStep partition;
  BuildStep build;
  TrainStep train;
};

inline PipelineRun run_pipeline(const PipelineConfig& cfg, const Dataset& ds, const fs::path& work,
                                std::ostream& log) {
  PipelineRun r;
  r.mlp = run_pretrain_mlp(cfg, ds, work, log);
  r.partition = run_partition(cfg, ds, work, log);
  r.build = run_build_elu_graph(cfg, ds, work, log);
  r.train = run_train(cfg, ds, work, log);
  return r;
}

struct BenchRow {
  std::int64_t n = 0;
  int classes = 0;
  double q_update_seconds = 0.0;  // best of the trials
  double assembly_seconds = 0.0;
};

// Times one Q-update and one S* assembly on random probability-valued H and
// Q at each size. Each trial repeats the Q-update until at least 20 ms have
// elapsed; the minimum per-call time over trials is reported.
inline std::vector<BenchRow> run_bench(const PipelineConfig& cfg, bool with_assembly, std::ostream& log) {
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (const auto n : cfg.bench.sizes) {
    Rng rng(sub_seed(cfg.seed, "bench"));
    const int c = cfg.bench.classes;
    DenseMatrix h(n, c), q(n, c);
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      h.data()[i] = rng.uniform();
      q.data()[i] = rng.uniform();
    }
    h = softmax_rows(h * 4.0);
    q = softmax_rows(q * 4.0);
    std::vector<NodeId> clamp;
    for (std::int64_t v = 0; v < n; v += 10) clamp.push_back(v);
    BenchRow row{n, c, 1e300, 1e300};
    const WoodburyInverse inv(h, resolved_beta(cfg.elu, n, c));
    for (int t = 0; t < cfg.bench.repeats; ++t) {
      int calls = 0;
      const auto t0 = clock::now();
      double elapsed = 0.0;
      do {
        DenseMatrix next = q_update(h, inv, q, clamp, q);
        if (!next.allFinite()) throw NumericError("bench: non-finite Q");
        ++calls;
        elapsed = std::chrono::duration<double>(clock::now() - t0).count();
      } while (elapsed < 0.02);
      row.q_update_seconds = std::min(row.q_update_seconds, elapsed / calls);
    }
    if (with_assembly) {
      EluGraphConfig ecfg = cfg.elu;
      ecfg.keep_dense = false;
      for (int t = 0; t < std::min(cfg.bench.repeats, 3); ++t) {
        BuildStats st;
        const auto t0 = clock::now();
        const auto right = s_star_right_factor(h, q, inv);
        const auto s = assemble_sparse_s_star(h, right, ecfg, st);
        row.assembly_seconds =
            std::min(row.assembly_seconds, std::chrono::duration<double>(clock::now() - t0).count());
        if (s.rows() != n) throw NumericError("bench: bad S* shape");
      }
    } else {
      row.assembly_seconds = 0.0;
    }
    log << "bench: n=" << n << " q_update " << row.q_update_seconds << " s, assembly " << row.assembly_seconds
        << " s\n";
    rows.push_back(row);
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "n,classes,q_update_seconds,assembly_seconds\n";
  for (const auto& r : rows)
    out += std::to_string(r.n) + ',' + std::to_string(r.classes) + ',' + format_double(r.q_update_seconds) + ',' +
           format_double(r.assembly_seconds) + '\n';
  return out;
}

// Dense S* with rows and columns ordered by class label (stable within a
// class). First row and first column carry the node ids.
inline std::string heatmap_csv(const CsrMatrix& s, const std::vector<int>& labels) {
  const auto n = s.rows();
  if (n > kHeatmapMaxNodes)
    throw ConfigError("export-heatmap: n=" + std::to_string(n) + " exceeds " + std::to_string(kHeatmapMaxNodes) +
                      "; use the sparse triplet file " + artifact::s_star + " instead");
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
  });
  const DenseMatrix d = s.to_dense();
  std::string out = "node";
  for (NodeId v : order) out += ',' + std::to_string(v);
  out += '\n';
  for (NodeId r : order) {
    out += std::to_string(r);
    for (NodeId c : order) out += ',' + format_double(d(r, c));
    out += '\n';
  }
  return out;
}

}  // namespace elugcn
