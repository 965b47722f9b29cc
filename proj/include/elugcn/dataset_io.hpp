#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "elugcn/graph.hpp"
#include "elugcn/text_io.hpp"

namespace elugcn {

enum class DatasetErrorKind {
  missing_file,
  malformed_line,
  index_out_of_range,
  row_count_mismatch,
  non_finite_value,
  invalid_split,
};

class DatasetError : public Error {
 public:
  DatasetError(DatasetErrorKind kind, const std::filesystem::path& file, std::size_t line,
               const std::string& detail)
      : Error(kind == DatasetErrorKind::missing_file ? ErrorCategory::missing_artifact
                                                     : ErrorCategory::config,
              file.string() + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                  detail),
        kind_(kind),
        file_(file),
        line_(line) {}

  DatasetErrorKind kind() const noexcept { return kind_; }
  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  DatasetErrorKind kind_;
  std::filesystem::path file_;
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string> dataset_lines(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p))
    throw DatasetError(DatasetErrorKind::missing_file, p, 0, "file not found");
  return read_lines(p);
}

inline bool blank(const std::string& s) { return split_ws(s).empty(); }

inline std::vector<NodeId> read_index_file(const std::filesystem::path& p, std::int64_t n) {
  std::vector<NodeId> out;
  const auto lines = dataset_lines(p);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = strip_comment(lines[i]);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const auto v = parse_int(tok[0]);
    if (tok.size() != 1 || !v)
      throw DatasetError(DatasetErrorKind::malformed_line, p, i + 1, "expected one node index");
    if (*v < 0 || *v >= n)
      throw DatasetError(DatasetErrorKind::index_out_of_range, p, i + 1,
                         "node index " + std::string(tok[0]) + " outside [0, " +
                             std::to_string(n) + ")");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;

  // features.txt fixes n.
  const auto feat_path = dir / "features.txt";
  const auto feat_lines = detail::dataset_lines(feat_path);
  std::size_t li = 0;
  while (li < feat_lines.size() && detail::blank(feat_lines[li])) ++li;
  if (li == feat_lines.size())
    throw DatasetError(DatasetErrorKind::malformed_line, feat_path, 1, "missing 'n d' header");
  const auto header = split_ws(feat_lines[li]);
  const auto n_opt = header.size() == 2 ? parse_int(header[0]) : std::nullopt;
  const auto d_opt = header.size() == 2 ? parse_int(header[1]) : std::nullopt;
  if (!n_opt || !d_opt || *n_opt < 0 || *d_opt < 0)
    throw DatasetError(DatasetErrorKind::malformed_line, feat_path, li + 1,
                       "header must be 'n d' with non-negative integers");
  const std::int64_t n = *n_opt;
  const std::int64_t d = *d_opt;
  ds.features = DenseMatrix::Zero(n, d);
  std::int64_t row = 0;
  for (++li; li < feat_lines.size(); ++li) {
    const auto tok = split_ws(feat_lines[li]);
    if (tok.empty()) continue;
    if (row >= n)
      throw DatasetError(DatasetErrorKind::row_count_mismatch, feat_path, li + 1,
                         "more feature rows than declared n=" + std::to_string(n));
    if (static_cast<std::int64_t>(tok.size()) != d)
      throw DatasetError(DatasetErrorKind::malformed_line, feat_path, li + 1,
                         "expected " + std::to_string(d) + " values, got " +
                             std::to_string(tok.size()));
    for (std::int64_t j = 0; j < d; ++j) {
      const auto v = parse_double(tok[static_cast<std::size_t>(j)]);
      if (!v)
        throw DatasetError(DatasetErrorKind::malformed_line, feat_path, li + 1,
                           "unparsable value '" + std::string(tok[static_cast<std::size_t>(j)]) +
                               "'");
      if (!std::isfinite(*v))
        throw DatasetError(DatasetErrorKind::non_finite_value, feat_path, li + 1,
                           "non-finite feature value");
      ds.features(row, j) = *v;
    }
    ++row;
  }
  if (row != n)
    throw DatasetError(DatasetErrorKind::row_count_mismatch, feat_path, li,
                       "declared n=" + std::to_string(n) + " but found " + std::to_string(row) +
                           " rows");

  const auto lab_path = dir / "labels.txt";
  const auto lab_lines = detail::dataset_lines(lab_path);
  int max_class = -1;
  for (std::size_t i = 0; i < lab_lines.size(); ++i) {
    const auto tok = split_ws(lab_lines[i]);
    if (tok.empty()) continue;
    const auto v = parse_int(tok[0]);
    if (tok.size() != 1 || !v || *v < kUnlabeled)
      throw DatasetError(DatasetErrorKind::malformed_line, lab_path, i + 1,
                         "expected a class index >= 0 or -1");
    if (static_cast<std::int64_t>(ds.labels.labels.size()) >= n)
      throw DatasetError(DatasetErrorKind::row_count_mismatch, lab_path, i + 1,
                         "more labels than the " + std::to_string(n) + " nodes in features.txt");
    ds.labels.labels.push_back(static_cast<int>(*v));
    max_class = std::max(max_class, static_cast<int>(*v));
  }
  if (static_cast<std::int64_t>(ds.labels.labels.size()) != n)
    throw DatasetError(DatasetErrorKind::row_count_mismatch, lab_path, lab_lines.size(),
                       "expected " + std::to_string(n) + " labels, found " +
                           std::to_string(ds.labels.labels.size()));
  ds.labels.num_classes = max_class + 1;

  const auto edge_path = dir / "graph.edges";
  const auto edge_lines = detail::dataset_lines(edge_path);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const auto line = strip_comment(edge_lines[i]);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2 && tok.size() != 3)
      throw DatasetError(DatasetErrorKind::malformed_line, edge_path, i + 1,
                         "expected 'src dst [weight]'");
    const auto s = parse_int(tok[0]);
    const auto t = parse_int(tok[1]);
    if (!s || !t)
      throw DatasetError(DatasetErrorKind::malformed_line, edge_path, i + 1,
                         "unparsable node index");
    if (*s < 0 || *s >= n || *t < 0 || *t >= n)
      throw DatasetError(DatasetErrorKind::index_out_of_range, edge_path, i + 1,
                         "edge endpoint outside [0, " + std::to_string(n) + ")");
    double w = 1.0;
    if (tok.size() == 3) {
      const auto wv = parse_double(tok[2]);
      if (!wv)
        throw DatasetError(DatasetErrorKind::malformed_line, edge_path, i + 1,
                           "unparsable weight");
      if (!std::isfinite(*wv))
        throw DatasetError(DatasetErrorKind::non_finite_value, edge_path, i + 1,
                           "non-finite edge weight");
      if (*wv < 0.0)
        throw DatasetError(DatasetErrorKind::malformed_line, edge_path, i + 1,
                           "negative edge weight");
      w = *wv;
    }
    edges.push_back({*s, *t, w});
  }
  ds.graph = SparseGraph::from_edges(n, edges);

  ds.labels.train = detail::read_index_file(dir / "train.idx", n);
  ds.labels.val = detail::read_index_file(dir / "val.idx", n);
  ds.labels.test = detail::read_index_file(dir / "test.idx", n);
  if (auto bad = ds.labels.violation())
    throw DatasetError(DatasetErrorKind::invalid_split, dir, 0, *bad);
  return ds;
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  std::string edges = "# src dst weight\n";
  for (const auto& e : ds.graph.undirected_edges())
    edges += std::to_string(e.src) + ' ' + std::to_string(e.dst) + ' ' +
             format_double(e.weight) + '\n';
  write_text_file(dir / "graph.edges", edges);

  std::string feats =
      std::to_string(ds.features.rows()) + ' ' + std::to_string(ds.features.cols()) + '\n';
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      if (j) feats += ' ';
      feats += format_double(ds.features(i, j));
    }
    feats += '\n';
  }
  write_text_file(dir / "features.txt", feats);

  std::string labels;
  for (int l : ds.labels.labels) labels += std::to_string(l) + '\n';
  write_text_file(dir / "labels.txt", labels);

  auto write_idx = [&](const char* name, const std::vector<NodeId>& idx) {
    std::string s;
    for (NodeId v : idx) s += std::to_string(v) + '\n';
    write_text_file(dir / name, s);
  };
  write_idx("train.idx", ds.labels.train);
  write_idx("val.idx", ds.labels.val);
  write_idx("test.idx", ds.labels.test);
}

}  // namespace elugcn
