#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "elugcn/pipeline.hpp"
#include "elugcn/sbm.hpp"

namespace {

using namespace elugcn;

struct Paths {
  std::string data = "data";
  std::string work = "work";
  std::string config;
};

PipelineConfig effective_config(const Paths& paths, const std::map<std::string, std::string>& flags) {
  PipelineConfig cfg = paths.config.empty() ? PipelineConfig{} : load_config(paths.config);
  for (const auto& [key, value] : flags) set_config_value(cfg, key, value);
  validate(cfg);
  return cfg;
}

Dataset load_input(const Paths& paths) {
  if (!fs::exists(fs::path(paths.data) / "features.txt"))
    throw MissingArtifactError("no dataset in " + paths.data + "; run `elugcn gen-sbm --out " + paths.data +
                               "` first or pass --data");
  return load_dataset(paths.data);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ELU-GCN: label-propagation-guided graph learning for GCNs"};
  app.require_subcommand(1);
  Paths paths;
  std::map<std::string, std::string> flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--data", paths.data, "dataset directory")->capture_default_str();
    sub->add_option("--work", paths.work, "directory for artifacts")->capture_default_str();
    sub->add_option("--config", paths.config, "key=value configuration file");
    for (const auto& k : config_keys())
      sub->add_option_function<std::string>(
          "--" + k.flag, [&flags, key = k.key](const std::string& v) { flags[key] = v; }, k.help + " [" + k.key + "]");
  };

  SbmOptions sbm;
  std::string sbm_out = "data";
  auto* gen = app.add_subcommand("gen-sbm", "write a stochastic block model dataset");
  gen->add_option("--out", sbm_out, "output directory")->capture_default_str();
  gen->add_option("--n-per-class", sbm.n_per_class)->capture_default_str();
  gen->add_option("--classes", sbm.num_classes)->capture_default_str();
  gen->add_option("--p-in", sbm.p_in)->capture_default_str();
  gen->add_option("--p-out", sbm.p_out)->capture_default_str();
  gen->add_option("--feat-dim", sbm.feat_dim)->capture_default_str();
  gen->add_option("--feat-shift", sbm.feat_shift)->capture_default_str();
  gen->add_option("--train-per-class", sbm.train_per_class)->capture_default_str();
  gen->add_option("--val-count", sbm.val_count, "-1 selects a quarter of the nodes")->capture_default_str();
  gen->add_option_function<std::string>(
      "--seed", [&flags](const std::string& v) { flags["seed"] = v; },
      "master seed; the generator uses its 'sbm' sub-seed");
  gen->add_option("--config", paths.config, "key=value configuration file");

  auto* pre = app.add_subcommand("pretrain-mlp", "train the feature-only MLP used to build H");
  auto* par = app.add_subcommand("partition", "train the GCN baseline, run LPA and split ELU / NELU nodes");
  auto* build = app.add_subcommand("build-elu-graph", "solve for the ELU graph S* and write its sparse triplets");
  auto* train = app.add_subcommand("train", "train the dual-branch ELU-GCN");
  auto* eval = app.add_subcommand("eval", "recompute all metrics from saved checkpoints");
  auto* bench = app.add_subcommand("bench", "time the Q-update and S* assembly over several sizes");
  bool no_assembly = false;
  bench->add_flag("--no-assembly", no_assembly, "only time the Q-update");
  auto* heat = app.add_subcommand("export-heatmap", "write S* as a dense CSV ordered by class label");
  for (auto* sub : {pre, par, build, train, eval, bench, heat}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::config);
  }

  try {
    if (gen->parsed()) {
      const auto cfg = effective_config(paths, flags);
      sbm.seed = sub_seed(cfg.seed, "sbm");
      const auto ds = gen_sbm(sbm);
      save_dataset(sbm_out, ds);
      std::cerr << "gen-sbm: wrote " << ds.labels.num_nodes() << " nodes, " << ds.graph.undirected_edges().size()
                << " edges to " << sbm_out << '\n';
      return 0;
    }
    const auto cfg = effective_config(paths, flags);
    const fs::path work = paths.work;
    if (bench->parsed()) {
      const auto rows = run_bench(cfg, !no_assembly, std::cerr);
      write_text_file(work / "bench.csv", config_text(cfg, "# ") + bench_csv(rows));
      return 0;
    }
    const auto ds = load_input(paths);
    if (pre->parsed()) run_pretrain_mlp(cfg, ds, work, std::cerr);
    if (par->parsed()) run_partition(cfg, ds, work, std::cerr);
    if (build->parsed()) run_build_elu_graph(cfg, ds, work, std::cerr);
    if (train->parsed()) run_train(cfg, ds, work, std::cerr);
    if (eval->parsed()) run_eval(cfg, ds, work, std::cerr);
    if (heat->parsed()) {
      require_artifact(work / artifact::s_star, "build-elu-graph");
      const auto s = load_triplets(work / artifact::s_star, ds.labels.num_nodes());
      write_text_file(work / "s_star_heatmap.csv", heatmap_csv(s, ds.labels.labels));
      std::cerr << "export-heatmap: wrote " << (work / "s_star_heatmap.csv").string() << '\n';
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::numeric);
  }
}
