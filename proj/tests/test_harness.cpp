#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "elugcn/pipeline.hpp"
#include "elugcn/sbm.hpp"
#include "test_util.hpp"

using namespace elugcn;
using namespace elugcn::testing;

namespace {

PipelineConfig quick_config() {
  PipelineConfig cfg;
  cfg.mlp.epochs = 60;
  cfg.gcn.epochs = 60;
  cfg.elu.k = 3;
  return cfg;
}

Dataset fixture() {
  SbmOptions o;
  o.n_per_class = 40;
  o.num_classes = 3;
  o.p_in = 0.15;
  o.p_out = 0.01;
  o.train_per_class = 8;
  o.seed = 7;
  return gen_sbm(o);
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.find("timing") != std::string::npos || name == "bench.csv") continue;
    out[name] = read_text_file(e.path());
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ELUGCN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(validate(PipelineConfig{})); }

TEST(Config, TextRoundTrip) {
  PipelineConfig cfg;
  apply_config_text(cfg, "seed = 9  # comment\nelu.beta=2.5\ncon.lambda=0.3\n\nbench.sizes=10,20\n", "t");
  EXPECT_EQ(cfg.seed, 9u);
  ASSERT_TRUE(cfg.elu.beta.has_value());
  EXPECT_EQ(*cfg.elu.beta, 2.5);
  EXPECT_EQ(cfg.con.lambda, 0.3);
  EXPECT_EQ(cfg.bench.sizes, (std::vector<std::int64_t>{10, 20}));
  PipelineConfig again;
  apply_config_text(again, config_text(cfg), "t2");
  EXPECT_EQ(config_text(again), config_text(cfg));
  apply_config_text(again, "elu.beta=auto\n", "t3");
  EXPECT_FALSE(again.elu.beta.has_value());
}

TEST(Config, RejectsBadInput) {
  PipelineConfig cfg;
  EXPECT_THROW(apply_config_text(cfg, "nonsense=1\n", "t"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "seed\n", "t"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "gcn.lr=abc\n", "t"), ConfigError);
  for (const char* bad : {"con.tau=0", "con.lambda=1.5", "con.eta_fuse=-0.1", "elu.beta=0",
                          "elu.keep_fraction=0", "elu.k=0", "gcn.momentum=1"}) {
    PipelineConfig c;
    apply_config_text(c, bad, "t");
    EXPECT_THROW(validate(c), ConfigError) << bad;
  }
}

TEST(GeneralizationGap, EqualSeriesGiveZero) {
  std::vector<EpochRecord> h(10);
  for (int i = 0; i < 10; ++i) h[static_cast<std::size_t>(i)] = {i, 0.5, 0.5, 1.0, 1.0};
  const auto g = generalization_gap(h);
  EXPECT_EQ(g.series.size(), 10u);
  EXPECT_EQ(g.summary, 0.0);
}

TEST(GeneralizationGap, SummaryAveragesLastFifth) {
  std::vector<EpochRecord> h(7);
  for (int i = 0; i < 7; ++i) h[static_cast<std::size_t>(i)] = {i, 0.0, static_cast<double>(i), 0, 0};
  // ceil(0.2 * 7) = 2 epochs: gaps 5 and 6.
  EXPECT_DOUBLE_EQ(generalization_gap(h).summary, 5.5);
}

TEST(HistoryCsv, ParsesBack) {
  const auto dir = fresh_dir("history");
  std::vector<EpochRecord> h{{0, 1.25, 1.5, 0.5, 0.25}, {1, 0.75, 1.0, 0.75, 0.5}};
  write_text_file(dir / "h.csv", history_csv(h));
  const auto back = parse_history_csv(dir / "h.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].train_loss, 0.75);
  EXPECT_EQ(back[0].val_acc, 0.25);
}

TEST(Triplets, RoundTrip) {
  const auto dir = fresh_dir("triplets");
  DenseMatrix d(3, 3);
  d << 0.1, 0, -2.5e-17, 0, 0, 4, 1.0 / 3.0, 0, 0;
  const auto s = CsrMatrix::from_dense(d);
  write_text_file(dir / "s.triplets", triplets_text(s));
  EXPECT_EQ(load_triplets(dir / "s.triplets", 3).to_dense(), d);
}

TEST(Heatmap, OrdersByClassAndGuardsSize) {
  DenseMatrix d(3, 3);
  d << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const std::string csv = heatmap_csv(CsrMatrix::from_dense(d), {1, 0, 1});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "node,1,0,2");
  EXPECT_NE(csv.find("\n1,5,4,6\n"), std::string::npos);
  const auto big = CsrMatrix::from_triplets(kHeatmapMaxNodes + 1, kHeatmapMaxNodes + 1, {});
  EXPECT_THROW(heatmap_csv(big, std::vector<int>(kHeatmapMaxNodes + 1, 0)), ConfigError);
}

TEST(Pipeline, MissingPrerequisitesNameTheProducer) {
  const auto work = fresh_dir("missing");
  std::ostringstream log;
  try {
    run_build_elu_graph(quick_config(), fixture(), work, log);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("elugcn pretrain-mlp"), std::string::npos);
  }
  EXPECT_THROW(run_train(quick_config(), fixture(), work, log), MissingArtifactError);
  EXPECT_THROW(run_eval(quick_config(), fixture(), work, log), MissingArtifactError);
}

TEST(Pipeline, RerunsAreByteIdentical) {
  const auto ds = fixture();
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  std::ostringstream log;
  run_pipeline(quick_config(), ds, a, log);
  run_pipeline(quick_config(), ds, b, log);
  const auto ca = directory_contents(a), cb = directory_contents(b);
  EXPECT_EQ(ca.size(), 12u);
  EXPECT_EQ(ca, cb);
}

TEST(Pipeline, EvalReproducesTrainTimeAccuracy) {
  const auto ds = fixture();
  const auto work = fresh_dir("eval");
  std::ostringstream log;
  const auto run = run_pipeline(quick_config(), ds, work, log);
  const auto ev = run_eval(quick_config(), ds, work, log);
  EXPECT_EQ(ev.elugcn_test_acc, run.train.test_acc);
  EXPECT_EQ(ev.gcn_test_acc, run.partition.baseline_test_acc);
  EXPECT_EQ(ev.mlp_test_acc, run.mlp.test_acc);
  EXPECT_EQ(ev.intra_class_mass, run.build.intra_class_mass);
  EXPECT_DOUBLE_EQ(ev.elugcn_gap, run.train.gap.summary);
  EXPECT_TRUE(fs::exists(work / artifact::eval_report));
}

TEST(Pipeline, NoFusionNoContrastApproximatesBaseline) {
  const auto ds = fixture();
  const auto work = fresh_dir("nofuse");
  auto cfg = quick_config();
  cfg.con.eta_fuse = 0.0;
  cfg.con.lambda = 0.0;
  std::ostringstream log;
  const auto run = run_pipeline(cfg, ds, work, log);
  EXPECT_NEAR(run.train.test_acc, run.partition.baseline_test_acc, 0.002);
}

TEST(Pipeline, HistoryLengthMatchesEpochs) {
  const auto ds = fixture();
  const auto work = fresh_dir("hist");
  std::ostringstream log;
  const auto run = run_pipeline(quick_config(), ds, work, log);
  EXPECT_EQ(run.train.gap.series.size(), 60u);
  EXPECT_EQ(parse_history_csv(work / artifact::train_history).size(), 60u);
  EXPECT_EQ(run.partition.baseline_gap.series.size(), 60u);
}

TEST(Bench, ProducesOneRowPerSize) {
  PipelineConfig cfg;
  cfg.bench.sizes = {64, 128};
  cfg.bench.classes = 4;
  cfg.bench.repeats = 1;
  std::ostringstream log;
  const auto rows = run_bench(cfg, true, log);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].n, 128);
  EXPECT_GT(rows[0].q_update_seconds, 0.0);
  EXPECT_GT(rows[1].assembly_seconds, 0.0);
  EXPECT_EQ(bench_csv(rows).substr(0, 4), "n,cl");
}

TEST(Cli, EndToEndAndExitCodes) {
  const auto root = fresh_dir("cli");
  const std::string data = "--data " + (root / "data").string();
  const std::string work = "--work " + (root / "work").string();
  const std::string quick = " --mlp-epochs 40 --gcn-epochs 40 --elu-k 3";
  EXPECT_EQ(run_cli("gen-sbm --out " + (root / "data").string() + " --n-per-class 30 --classes 3"), 0);
  EXPECT_EQ(run_cli("train " + data + " " + work), 3);
  EXPECT_EQ(run_cli("pretrain-mlp " + data + " " + work + quick), 0);
  EXPECT_EQ(run_cli("build-elu-graph " + data + " " + work + quick), 3);
  EXPECT_EQ(run_cli("partition " + data + " " + work + quick), 0);
  EXPECT_EQ(run_cli("build-elu-graph " + data + " " + work + quick), 0);
  EXPECT_EQ(run_cli("train " + data + " " + work + quick), 0);
  EXPECT_EQ(run_cli("eval " + data + " " + work + quick), 0);
  EXPECT_EQ(run_cli("export-heatmap " + data + " " + work), 0);
  EXPECT_TRUE(fs::exists(root / "work" / "s_star_heatmap.csv"));
  EXPECT_EQ(run_cli("train " + data + " " + work + " --tau 0"), 2);
  EXPECT_EQ(run_cli("train " + data + " " + work + " --no-such-flag"), 2);
  EXPECT_EQ(run_cli("eval --data " + (root / "nowhere").string() + " " + work), 3);
  write_text_file(root / "bad.cfg", "gcn.lr = fast\n");
  EXPECT_EQ(run_cli("train " + data + " " + work + " --config " + (root / "bad.cfg").string()), 2);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto root = fresh_dir("cli_cfg");
  const std::string data = "--data " + (root / "data").string();
  const std::string work = "--work " + (root / "work").string();
  ASSERT_EQ(run_cli("gen-sbm --out " + (root / "data").string() + " --n-per-class 20 --classes 2"), 0);
  write_text_file(root / "run.cfg", "mlp.epochs = 5\nmlp.hidden = 7\n");
  ASSERT_EQ(run_cli("pretrain-mlp " + data + " " + work + " --config " + (root / "run.cfg").string() +
                    " --mlp-hidden 9"),
            0);
  const auto report = read_text_file(root / "work" / artifact::mlp_report);
  EXPECT_NE(report.find("mlp.epochs=5"), std::string::npos);
  EXPECT_NE(report.find("mlp.hidden=9"), std::string::npos);
  const auto ck = load_checkpoint(root / "work" / artifact::mlp_checkpoint);
  EXPECT_EQ(ck.tensors.front().second.cols(), 9);
}
