#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "elugcn/elu_graph.hpp"
#include "test_util.hpp"

using namespace elugcn;
using namespace elugcn::testing;

namespace {

void apply_clamp(DenseMatrix& q, const DenseMatrix& y, const std::vector<NodeId>& rows) {
  for (NodeId v : rows) q.row(v) = y.row(v);
}

ExpandedLabels random_expanded(Eigen::Index n, int c, Rng& rng) {
  ExpandedLabels e{DenseMatrix::Zero(n, c), {}};
  for (Eigen::Index v = 0; v < n; ++v)
    if (v % 3 == 0) {
      e.y(v, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(c)))) = 1.0;
      e.clamp_set.push_back(v);
    }
  return e;
}

}  // namespace

TEST(ExpandLabels, EmptyEluLeavesYUnchanged) {
  const auto ls = simple_labels(9, 3, 1);
  EluPartition p;
  Rng rng(1);
  const auto e = expand_labels(ls, p, random_probs(9, 3, rng));
  EXPECT_EQ(e.y, ls.onehot());
  EXPECT_EQ(e.clamp_set, ls.train);
}

TEST(ExpandLabels, EluNodeGetsGcnClassRow) {
  const auto ls = simple_labels(9, 3, 1);
  DenseMatrix probs = DenseMatrix::Constant(9, 3, 0.1);
  probs(5, 2) = 0.8;
  EluPartition p;
  p.v_elu = {5};
  const auto e = expand_labels(ls, p, probs);
  EXPECT_EQ(e.y.row(5), (Eigen::RowVector3d(0, 0, 1)));
  std::vector<NodeId> expect = ls.train;
  expect.push_back(5);
  std::sort(expect.begin(), expect.end());
  EXPECT_EQ(e.clamp_set, expect);
}

TEST(ExpandLabels, RejectsWrongShape) {
  const auto ls = simple_labels(9, 3, 1);
  EXPECT_THROW(expand_labels(ls, EluPartition{}, DenseMatrix::Zero(9, 2)), ShapeError);
}

TEST(ClosedForm, HugeBetaGivesNearZero) {
  Rng rng(2);
  const auto h = random_probs(10, 3, rng);
  const auto q = random_matrix(10, 3, rng, 0, 1);
  EXPECT_LT(closed_form_S(h, q, 1e9).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ClosedForm, SatisfiesNormalEquation) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto h = random_matrix(6, 3, rng);
    const auto q = random_matrix(6, 3, rng);
    const double beta = 0.5;
    const DenseMatrix s = closed_form_S(h, q, beta);
    DenseMatrix g = h * h.transpose();
    g.diagonal().array() += beta;
    EXPECT_LT(max_abs_diff(s * g, h * q.transpose()), 1e-10);
  }
}

TEST(ClosedForm, MatchesWoodburyForm) {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto h = random_probs(15, 4, rng);
    const auto q = random_matrix(15, 4, rng, 0, 1);
    const double beta = rng.uniform(0.1, 10.0);
    const WoodburyInverse inv(h, beta);
    const DenseMatrix s_wb = h * s_star_right_factor(h, q, inv);
    EXPECT_LT(max_abs_diff(closed_form_S(h, q, beta), s_wb), 1e-8);
  }
}

TEST(ClosedForm, Guards) {
  EXPECT_THROW(closed_form_S(DenseMatrix::Zero(3, 2), DenseMatrix::Zero(3, 2), 0.0), ConfigError);
  EXPECT_THROW(closed_form_S(DenseMatrix::Zero(3, 2), DenseMatrix::Zero(4, 2), 1.0), ShapeError);
  EXPECT_THROW(closed_form_S(DenseMatrix::Zero(kClosedFormMaxNodes + 1, 2),
                             DenseMatrix::Zero(kClosedFormMaxNodes + 1, 2), 1.0),
               ConfigError);
}

TEST(QUpdate, ScalarCase) {
  const DenseMatrix h = DenseMatrix::Constant(1, 1, 1.0);
  const DenseMatrix q = DenseMatrix::Constant(1, 1, 1.0);
  const double beta = 0.5;
  EXPECT_NEAR(q_update(h, q, beta, {}, q)(0, 0), 1.0 / (1.0 + beta), 1e-15);
  EXPECT_EQ(q_update(h, q, beta, {0}, q)(0, 0), 1.0);
}

TEST(QUpdate, EqualsDenseClosedFormThenClamp) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const auto h = random_probs(12, 3, rng);
    const auto e = random_expanded(12, 3, rng);
    const DenseMatrix q_prev = random_matrix(12, 3, rng, 0, 1);
    const double beta = rng.uniform(0.1, 10.0);
    DenseMatrix dense = closed_form_S(h, q_prev, beta) * q_prev;
    apply_clamp(dense, e.y, e.clamp_set);
    EXPECT_LT(max_abs_diff(q_update(h, q_prev, beta, e.clamp_set, e.y), dense), 1e-8);
  }
}

TEST(BuildEluGraph, SingleIterationMatchesClosedForm) {
  Rng rng(6);
  const auto h = random_probs(12, 3, rng);
  const auto e = random_expanded(12, 3, rng);
  EluGraphConfig cfg;
  cfg.k = 1;
  cfg.beta = 0.7;
  cfg.keep_dense = true;
  const auto res = build_elu_graph(h, e, cfg);
  DenseMatrix q1 = closed_form_S(h, e.y, 0.7) * e.y;
  apply_clamp(q1, e.y, e.clamp_set);
  EXPECT_LT(max_abs_diff(res.q_final, q1), 1e-8);
  EXPECT_LT(max_abs_diff(res.s_dense, closed_form_S(h, q1, 0.7)), 1e-8);
}

TEST(BuildEluGraph, KeepAllDropsNothing) {
  Rng rng(7);
  const auto h = random_probs(20, 3, rng);
  EluGraphConfig cfg;
  cfg.k = 2;
  cfg.beta = 2.0;
  cfg.keep_fraction = 1.0;
  cfg.keep_dense = true;
  const auto res = build_elu_graph(h, random_expanded(20, 3, rng), cfg);
  EXPECT_EQ(res.s_sparse.to_dense(), res.s_dense);
}

TEST(BuildEluGraph, ClampInvariantHoldsEveryIteration) {
  Rng rng(8);
  const auto h = random_probs(30, 4, rng);
  const auto e = random_expanded(30, 4, rng);
  EluGraphConfig cfg;
  cfg.k = 6;
  int calls = 0;
  build_elu_graph(h, e, cfg, [&](int, const DenseMatrix& q) {
    ++calls;
    for (NodeId v : e.clamp_set)
      for (Eigen::Index j = 0; j < q.cols(); ++j) ASSERT_EQ(q(v, j), e.y(v, j));
  });
  EXPECT_EQ(calls, cfg.k + 1);
}

TEST(BuildEluGraph, AutoBetaIsNodesPerClass) {
  Rng rng(9);
  const auto h = random_probs(40, 4, rng);
  EluGraphConfig cfg;
  cfg.k = 2;
  const auto res = build_elu_graph(h, random_expanded(40, 4, rng), cfg);
  EXPECT_EQ(res.stats.beta, 10.0);
  EXPECT_EQ(res.stats.q_frobenius.size(), 2u);
  EXPECT_EQ(res.stats.iteration_seconds.size(), 2u);
}

TEST(BuildEluGraph, RejectsBadConfig) {
  Rng rng(10);
  const auto h = random_probs(6, 2, rng);
  EluGraphConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(build_elu_graph(h, random_expanded(6, 2, rng), cfg), ConfigError);
  cfg.k = 1;
  cfg.keep_fraction = 0.0;
  EXPECT_THROW(build_elu_graph(h, random_expanded(6, 2, rng), cfg), ConfigError);
}

TEST(BuildEluGraph, NonFiniteQIsReported) {
  Rng rng(11);
  const auto h = random_probs(50, 2, rng);
  ExpandedLabels e{DenseMatrix::Constant(50, 2, 1.0), {}};
  EluGraphConfig cfg;
  cfg.k = 40;
  cfg.beta = 1e-3;
  EXPECT_THROW(build_elu_graph(h, e, cfg), NumericError);
}

TEST(Sparsify, KeepsLargestMagnitudes) {
  DenseMatrix s(2, 2);
  s << 3, 1, -2, 0.5;
  const auto csr = sparsify(s, 0.5);
  EXPECT_EQ(csr.nnz(), 2u);
  EXPECT_EQ(csr.at(0, 0), 3.0);
  EXPECT_EQ(csr.at(1, 0), -2.0);
  EXPECT_EQ(csr.at(0, 1), 0.0);
}

TEST(Sparsify, TenPercentOfDistinctValues) {
  Rng rng(12);
  const auto s = random_matrix(100, 100, rng);
  const auto csr = sparsify(s, 0.1);
  EXPECT_GE(csr.nnz(), 999u);
  EXPECT_LE(csr.nnz(), 1001u);
}

TEST(Sparsify, TiesAtThresholdAreKept) {
  const DenseMatrix s = DenseMatrix::Constant(3, 3, 1.0);
  EXPECT_EQ(sparsify(s, 0.1).nnz(), 9u);
}

TEST(Sparsify, KeepCountBounds) {
  EXPECT_EQ(keep_count(100, 0.1), 10);
  EXPECT_EQ(keep_count(100, 0.001), 1);
  EXPECT_EQ(keep_count(7, 1.0), 7);
  EXPECT_THROW(keep_count(10, 1.5), ConfigError);
}

TEST(Sparsify, StreamedAssemblyMatchesDense) {
  Rng rng(13);
  const auto h = random_probs(70, 5, rng);
  const auto q = random_matrix(70, 5, rng, 0, 1);
  const WoodburyInverse inv(h, 3.0);
  const DenseMatrix right = s_star_right_factor(h, q, inv);
  const DenseMatrix dense = h * right;
  for (double keep : {0.02, 0.1, 0.5}) {
    const CsrMatrix ref = sparsify(dense, keep);
    for (Eigen::Index block : {1, 7, 64, 256}) {
      EluGraphConfig cfg;
      cfg.keep_fraction = keep;
      cfg.block_rows = block;
      BuildStats stats;
      const auto got = assemble_sparse_s_star(h, right, cfg, stats);
      EXPECT_EQ(got.nnz(), ref.nnz());
      EXPECT_EQ(got.to_dense(), ref.to_dense()) << "keep " << keep << " block " << block;
      EXPECT_EQ(stats.kept, static_cast<std::int64_t>(ref.nnz()));
    }
  }
}

TEST(Sparsify, ClipNegativeDropsNegatives) {
  Rng rng(14);
  const auto h = random_matrix(20, 3, rng);
  const auto q = random_matrix(20, 3, rng);
  const WoodburyInverse inv(h, 1.0);
  const DenseMatrix right = s_star_right_factor(h, q, inv);
  EluGraphConfig cfg;
  cfg.keep_fraction = 0.3;
  BuildStats plain, clipped;
  const auto a = assemble_sparse_s_star(h, right, cfg, plain);
  cfg.clip_negative = true;
  const auto b = assemble_sparse_s_star(h, right, cfg, clipped);
  std::int64_t negatives = 0;
  a.for_each([&](std::int64_t, std::int64_t, double v) { negatives += v < 0.0; });
  EXPECT_GT(negatives, 0);
  EXPECT_EQ(clipped.negative_dropped, negatives);
  EXPECT_EQ(b.nnz() + static_cast<std::size_t>(negatives), a.nnz());
  b.for_each([](std::int64_t, std::int64_t, double v) { EXPECT_GT(v, 0.0); });
}

TEST(RidgeObjective, ValueAtZeroAndIdentity) {
  Rng rng(15);
  const auto h = random_matrix(5, 2, rng);
  const auto q = random_matrix(5, 2, rng);
  EXPECT_NEAR(ridge_objective(DenseMatrix::Zero(5, 5), h, q, 2.0), q.squaredNorm(), 1e-14);
  const DenseMatrix eye = DenseMatrix::Identity(5, 5);
  EXPECT_NEAR(ridge_objective(eye, h, q, 2.0), (q - h).squaredNorm() + 10.0, 1e-12);
}

TEST(IntraClassMass, CountsSameClassShare) {
  DenseMatrix s(3, 3);
  s << 1, 0, -1, 0, 2, 0, 0, 0, 0;
  const std::vector<int> classes{0, 1, 0};
  const auto csr = CsrMatrix::from_dense(s);
  EXPECT_DOUBLE_EQ(intra_class_mass_fraction(csr, classes), 1.0);
  s(0, 1) = 4;
  EXPECT_DOUBLE_EQ(intra_class_mass_fraction(CsrMatrix::from_dense(s), classes), 0.5);
  EXPECT_EQ(intra_class_mass_fraction(CsrMatrix::from_dense(DenseMatrix::Zero(3, 3)), classes), 0.0);
}
