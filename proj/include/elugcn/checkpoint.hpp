#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "elugcn/numerics.hpp"
#include "elugcn/text_io.hpp"

namespace elugcn {

// Text checkpoint shared by the MLP and GCN models:
//
//   elugcn-checkpoint 1
//   kind <mlp|gcn|elugcn>
//   seed <u64>
//   tensors <count>
//   tensor <name> <rows> <cols>
//   <rows lines of cols space-separated decimals>
//   ...
//
// Decimals use the shortest representation that round-trips exactly.
struct Checkpoint {
  std::string kind;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, DenseMatrix>> tensors;

  const DenseMatrix& tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return m;
    throw ConfigError("checkpoint of kind '" + kind + "' has no tensor '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.first == name) return true;
    return false;
  }
};

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out = "elugcn-checkpoint 1\nkind " + ck.kind + "\nseed " + std::to_string(ck.seed) +
                    "\ntensors " + std::to_string(ck.tensors.size()) + "\n";
  for (const auto& [name, m] : ck.tensors) {
    out += "tensor " + name + ' ' + std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) out += ' ';
        out += format_double(m(i, j));
      }
      out += '\n';
    }
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& text, const std::string& origin = "checkpoint") {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  std::size_t li = 0;
  auto fail = [&](const std::string& why) -> ConfigError {
    return ConfigError(origin + ":" + std::to_string(li + 1) + ": " + why);
  };
  auto next = [&](std::size_t expect_tokens, std::string_view keyword) {
    if (li >= lines.size()) throw fail("unexpected end of file");
    auto tok = split_ws(lines[li]);
    if (tok.size() != expect_tokens || (!keyword.empty() && tok[0] != keyword))
      throw fail("expected '" + std::string(keyword) + "' line");
    return tok;
  };
  Checkpoint ck;
  if (next(2, "elugcn-checkpoint")[1] != "1") throw fail("unsupported checkpoint version");
  ++li;
  ck.kind = std::string(next(2, "kind")[1]);
  ++li;
  const auto seed = parse_uint(next(2, "seed")[1]);
  if (!seed) throw fail("bad seed");
  ck.seed = *seed;
  ++li;
  const auto count = parse_int(next(2, "tensors")[1]);
  if (!count || *count < 0) throw fail("bad tensor count");
  ++li;
  for (std::int64_t t = 0; t < *count; ++t) {
    auto head = next(4, "tensor");
    const auto rows = parse_int(head[2]);
    const auto cols = parse_int(head[3]);
    if (!rows || !cols || *rows < 0 || *cols < 0) throw fail("bad tensor shape");
    std::string name(head[1]);
    ++li;
    DenseMatrix m(*rows, *cols);
    for (std::int64_t i = 0; i < *rows; ++i, ++li) {
      auto vals = next(static_cast<std::size_t>(*cols), "");
      for (std::int64_t j = 0; j < *cols; ++j) {
        const auto v = parse_double(vals[static_cast<std::size_t>(j)]);
        if (!v || !std::isfinite(*v)) throw fail("bad value");
        m(i, j) = *v;
      }
    }
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& p, const Checkpoint& ck) {
  write_text_file(p, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) {
  return parse_checkpoint(read_text_file(p), p.string());
}

}  // namespace elugcn
