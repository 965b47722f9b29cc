#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "elugcn/contrastive.hpp"
#include "elugcn/elu_graph.hpp"
#include "elugcn/gcn.hpp"
#include "elugcn/mlp.hpp"
#include "elugcn/rng.hpp"
#include "elugcn/text_io.hpp"

namespace elugcn {

struct BenchConfig {
  std::vector<std::int64_t> sizes{2000, 4000, 8000};
  int classes = 8;
  int repeats = 5;
};

// Every hyperparameter of the pipeline. Note that the sparsification
// fraction (`elu.keep_fraction`) and the branch fusion weight
// (`con.eta_fuse`) are unrelated knobs.
struct PipelineConfig {
  std::uint64_t seed = 0;
  MlpConfig mlp{64, 0.05, 300, 5e-4, 0.9, 0};
  int lpa_k = 10;
  EluGraphConfig elu;
  GcnConfig gcn;
  ContrastiveConfig con;
  BenchConfig bench;

  std::uint64_t mlp_seed() const { return sub_seed(seed, "mlp"); }
  std::uint64_t gcn_seed() const { return sub_seed(seed, "gcn"); }
  std::uint64_t head_seed() const { return sub_seed(seed, "head"); }

  MlpConfig mlp_config() const {
    MlpConfig c = mlp;
    c.seed = mlp_seed();
    return c;
  }
  GcnConfig gcn_config() const {
    GcnConfig c = gcn;
    c.seed = gcn_seed();
    return c;
  }
};

struct ConfigKey {
  std::string key;   // as it appears in the config file
  std::string flag;  // long CLI flag without the leading dashes
  std::string help;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

namespace detail {

inline double to_real(std::string_view key, std::string_view v) {
  const auto d = parse_double(v);
  if (!d || !std::isfinite(*d))
    throw ConfigError("config: '" + std::string(key) + "' expects a real number, got '" + std::string(v) + "'");
  return *d;
}

inline std::int64_t to_integer(std::string_view key, std::string_view v) {
  const auto i = parse_int(v);
  if (!i) throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  return *i;
}

inline bool to_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects a boolean, got '" + std::string(v) + "'");
}

template <typename T>
ConfigKey real_key(std::string key, std::string flag, std::string help, T PipelineConfig::*outer,
                   double T::*field) {
  return {key, std::move(flag), std::move(help),
          [=](PipelineConfig& c, std::string_view v) { c.*outer.*field = to_real(key, v); },
          [=](const PipelineConfig& c) { return format_double(c.*outer.*field); }};
}

template <typename T>
ConfigKey int_key(std::string key, std::string flag, std::string help, T PipelineConfig::*outer,
                  int T::*field) {
  return {key, std::move(flag), std::move(help),
          [=](PipelineConfig& c, std::string_view v) {
            c.*outer.*field = static_cast<int>(to_integer(key, v));
          },
          [=](const PipelineConfig& c) { return std::to_string(c.*outer.*field); }};
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  using P = PipelineConfig;
  static const std::vector<ConfigKey> keys = {
      {"seed", "seed", "run seed; component seeds are derived from it",
       [](P& c, std::string_view v) {
         const auto i = to_integer("seed", v);
         if (i < 0) throw ConfigError("config: 'seed' must be >= 0");
         c.seed = static_cast<std::uint64_t>(i);
       },
       [](const P& c) { return std::to_string(c.seed); }},
      int_key("mlp.hidden", "mlp-hidden", "MLP hidden width", &P::mlp, &MlpConfig::hidden),
      real_key("mlp.lr", "mlp-lr", "MLP learning rate", &P::mlp, &MlpConfig::lr),
      int_key("mlp.epochs", "mlp-epochs", "MLP epochs", &P::mlp, &MlpConfig::epochs),
      real_key("mlp.weight_decay", "mlp-weight-decay", "MLP weight decay", &P::mlp, &MlpConfig::weight_decay),
      real_key("mlp.momentum", "mlp-momentum", "MLP momentum", &P::mlp, &MlpConfig::momentum),
      {"lpa.k", "lpa-k", "label propagation steps on the original graph",
       [](P& c, std::string_view v) { c.lpa_k = static_cast<int>(to_integer("lpa.k", v)); },
       [](const P& c) { return std::to_string(c.lpa_k); }},
      {"elu.beta", "beta", "ridge weight beta (> 0), or 'auto' for n / c",
       [](P& c, std::string_view v) {
         if (v == "auto")
           c.elu.beta.reset();
         else
           c.elu.beta = to_real("elu.beta", v);
       },
       [](const P& c) { return c.elu.beta ? format_double(*c.elu.beta) : std::string("auto"); }},
      int_key("elu.k", "elu-k", "Q-update iterations", &P::elu, &EluGraphConfig::k),
      real_key("elu.keep_fraction", "keep-fraction", "fraction of S* entries kept", &P::elu,
               &EluGraphConfig::keep_fraction),
      {"elu.clip_negative", "clip-negative", "drop negative S* entries (ablation)",
       [](P& c, std::string_view v) { c.elu.clip_negative = to_bool("elu.clip_negative", v); },
       [](const P& c) { return std::string(c.elu.clip_negative ? "true" : "false"); }},
      int_key("gcn.hidden", "gcn-hidden", "GCN hidden width", &P::gcn, &GcnConfig::hidden),
      real_key("gcn.lr", "gcn-lr", "GCN learning rate", &P::gcn, &GcnConfig::lr),
      int_key("gcn.epochs", "gcn-epochs", "GCN epochs", &P::gcn, &GcnConfig::epochs),
      real_key("gcn.momentum", "gcn-momentum", "GCN momentum", &P::gcn, &GcnConfig::momentum),
      real_key("gcn.weight_decay", "gcn-weight-decay", "GCN weight decay on W1", &P::gcn,
               &GcnConfig::weight_decay),
      real_key("con.tau", "tau", "contrastive temperature (> 0)", &P::con, &ContrastiveConfig::tau),
      real_key("con.gamma", "gamma", "uniformity weight", &P::con, &ContrastiveConfig::gamma),
      real_key("con.lambda", "lambda", "contrastive loss weight in [0, 1]", &P::con, &ContrastiveConfig::lambda),
      real_key("con.eta_fuse", "eta-fuse", "ELU-branch weight of the fused prediction in [0, 1]", &P::con,
               &ContrastiveConfig::eta_fuse),
      int_key("con.proj_dim", "proj-dim", "projection head width", &P::con, &ContrastiveConfig::proj_dim),
      {"bench.sizes", "bench-sizes", "comma-separated node counts for bench",
       [](P& c, std::string_view v) {
         c.bench.sizes.clear();
         std::size_t start = 0;
         for (std::size_t i = 0; i <= v.size(); ++i)
           if (i == v.size() || v[i] == ',') {
             c.bench.sizes.push_back(to_integer("bench.sizes", v.substr(start, i - start)));
             start = i + 1;
           }
       },
       [](const P& c) {
         std::string s;
         for (auto n : c.bench.sizes) s += (s.empty() ? "" : ",") + std::to_string(n);
         return s;
       }},
      int_key("bench.classes", "bench-classes", "class count for bench", &P::bench, &BenchConfig::classes),
      int_key("bench.repeats", "bench-repeats", "timing trials per size", &P::bench, &BenchConfig::repeats),
  };
  return keys;
}

inline const ConfigKey& find_config_key(std::string_view key) {
  for (const auto& k : config_keys())
    if (k.key == key) return k;
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

inline void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  find_config_key(key).set(cfg, value);
}

// Range checks on every numeric field.
inline void validate(const PipelineConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  need(c.mlp.hidden >= 1, "mlp.hidden must be >= 1");
  need(c.mlp.lr >= 0.0, "mlp.lr must be >= 0");
  need(c.mlp.epochs >= 0, "mlp.epochs must be >= 0");
  need(c.mlp.weight_decay >= 0.0, "mlp.weight_decay must be >= 0");
  need(c.mlp.momentum >= 0.0 && c.mlp.momentum < 1.0, "mlp.momentum must lie in [0, 1)");
  need(c.lpa_k >= 1, "lpa.k must be >= 1");
  need(!c.elu.beta || *c.elu.beta > 0.0, "elu.beta must be > 0");
  need(c.elu.k >= 1, "elu.k must be >= 1");
  need(c.elu.keep_fraction > 0.0 && c.elu.keep_fraction <= 1.0, "elu.keep_fraction must lie in (0, 1]");
  need(c.gcn.hidden >= 1, "gcn.hidden must be >= 1");
  need(c.gcn.lr >= 0.0, "gcn.lr must be >= 0");
  need(c.gcn.epochs >= 0, "gcn.epochs must be >= 0");
  need(c.gcn.momentum >= 0.0 && c.gcn.momentum < 1.0, "gcn.momentum must lie in [0, 1)");
  need(c.gcn.weight_decay >= 0.0, "gcn.weight_decay must be >= 0");
  need(c.con.tau > 0.0, "con.tau must be > 0");
  need(c.con.gamma >= 0.0, "con.gamma must be >= 0");
  need(c.con.lambda >= 0.0 && c.con.lambda <= 1.0, "con.lambda must lie in [0, 1]");
  need(c.con.eta_fuse >= 0.0 && c.con.eta_fuse <= 1.0, "con.eta_fuse must lie in [0, 1]");
  need(c.con.proj_dim >= 1, "con.proj_dim must be >= 1");
  need(!c.bench.sizes.empty(), "bench.sizes must not be empty");
  for (auto n : c.bench.sizes) need(n >= 2, "bench.sizes entries must be >= 2");
  need(c.bench.classes >= 1, "bench.classes must be >= 1");
  need(c.bench.repeats >= 1, "bench.repeats must be >= 1");
}

// Flat key=value text; '#' starts a comment.
inline void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin) {
  std::size_t line_no = 0;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const std::string line(strip_comment(rest.substr(0, nl)));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    const auto key = split_ws(std::string_view(line).substr(0, eq));
    const auto val = split_ws(std::string_view(line).substr(eq + 1));
    if (key.size() != 1 || val.size() != 1)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    set_config_value(cfg, key[0], val[0]);
  }
}

inline PipelineConfig load_config(const std::filesystem::path& p) {
  PipelineConfig cfg;
  if (!std::filesystem::exists(p)) throw ConfigError("config file not found: " + p.string());
  apply_config_text(cfg, read_text_file(p), p.string());
  return cfg;
}

inline std::string config_text(const PipelineConfig& cfg, std::string_view prefix = "") {
  std::string out;
  for (const auto& k : config_keys())
    out += std::string(prefix) + k.key + '=' + k.get(cfg) + '\n';
  return out;
}

}  // namespace elugcn
