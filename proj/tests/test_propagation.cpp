#include <gtest/gtest.h>

#include "elugcn/propagation.hpp"
#include "test_util.hpp"

using namespace elugcn;
using namespace elugcn::testing;

TEST(Lpa, AllClampedKeepsY) {
  Rng rng(1);
  const auto g = random_graph(8, 0.4, rng);
  const auto labels = simple_labels(8, 2, 4);
  const auto st = lpa(normalize(g), labels.onehot(), labels.train, 5);
  EXPECT_EQ(st.q, labels.onehot());
  EXPECT_EQ(st.step, 5);
}

TEST(Lpa, TwoNodeOneStep) {
  const auto a = normalize(SparseGraph::from_edges(2, {{0, 1, 1.0}}));
  DenseMatrix y = DenseMatrix::Zero(2, 2);
  y(0, 0) = 1.0;
  const auto st = lpa(a, y, {0}, 1);
  EXPECT_NEAR(st.q(1, 0), 0.5, 1e-15);
  EXPECT_EQ(st.q(1, 1), 0.0);
  EXPECT_EQ(lpa_predict(st)[1], 0);
}

TEST(Lpa, PathGraphMatchesDenseRepeatedMultiplication) {
  const auto g = SparseGraph::from_edges(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
  const DenseMatrix a = dense_normalized(g);
  DenseMatrix y = DenseMatrix::Zero(4, 2);
  y(0, 0) = 1.0;
  y(3, 1) = 1.0;
  DenseMatrix q = y;
  for (int i = 0; i < 3; ++i) {
    q = a * q;
    q.row(0) = y.row(0);
    q.row(3) = y.row(3);
  }
  EXPECT_LT(max_abs_diff(lpa(normalize(g), y, {0, 3}, 3).q, q), 1e-12);
  EXPECT_LT(max_abs_diff(lpa(DenseOperator{a}, y, {0, 3}, 3).q, q), 1e-12);
}

TEST(Lpa, ClampInvariantAtEveryStep) {
  Rng rng(2);
  const auto g = random_graph(20, 0.2, rng, true);
  const auto labels = simple_labels(20, 3, 2);
  const DenseMatrix y = labels.onehot();
  int steps = 0;
  lpa(normalize(g), y, labels.train, 8, [&](const PropagationState& s) {
    ++steps;
    for (NodeId v : labels.train) EXPECT_TRUE(s.q.row(v) == y.row(v));
    EXPECT_GE(s.q.minCoeff(), 0.0);
  });
  EXPECT_EQ(steps, 8);
}

TEST(Lpa, MonotoneReach) {
  Rng rng(3);
  const auto g = random_graph(30, 0.06, rng);
  const auto labels = simple_labels(30, 3, 1);
  std::size_t prev = 0;
  lpa(normalize(g), labels.onehot(), labels.train, 10, [&](const PropagationState& s) {
    std::size_t reached = 0;
    for (Eigen::Index i = 0; i < s.q.rows(); ++i) reached += (s.q.row(i).array() != 0.0).any() ? 1 : 0;
    EXPECT_GE(reached, prev);
    prev = reached;
  });
}

TEST(Lpa, RejectsZeroStepsAndBadShapes) {
  const auto a = normalize(SparseGraph::from_edges(2, {{0, 1, 1.0}}));
  EXPECT_THROW(lpa(a, DenseMatrix::Zero(2, 2), {}, 0), ConfigError);
  EXPECT_THROW(lpa(a, DenseMatrix::Zero(3, 2), {}, 1), ShapeError);
  EXPECT_THROW(lpa(a, DenseMatrix::Zero(2, 2), {5}, 1), ShapeError);
}

TEST(LpaPredict, ArgmaxTiesAndNoSignal) {
  PropagationState st;
  st.q.resize(3, 3);
  st.q << 0.2, 0.7, 0.1, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0;
  EXPECT_EQ(lpa_predict(st), (std::vector<int>{1, 0, kNoSignal}));
}

TEST(InfluenceOracle, NoLabeledNodesOfClass) {
  const auto g = SparseGraph::from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  auto labels = simple_labels(3, 2, 1);  // train {0 (class 0), 1 (class 1)}
  labels.train = {0};
  EXPECT_EQ(influence_oracle(normalize(g), labels, 2, 1, 3), 0.0);
}

TEST(InfluenceOracle, SingleEdgeOneStep) {
  const auto g = SparseGraph::from_edges(2, {{0, 1, 1.0}});
  LabelSet labels;
  labels.labels = {0, kUnlabeled};
  labels.num_classes = 1;
  labels.train = {0};
  EXPECT_NEAR(influence_oracle(normalize(g), labels, 1, 0, 1), 0.5, 1e-15);
}

TEST(InfluenceOracle, NormalizedScoresEqualUnclampedLpa) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = random_graph(8, 0.35, rng, true);
    const auto labels = simple_labels(8, 2, 2);
    const auto a = normalize(g);
    const int k = 3;
    const auto st = lpa(a, labels.onehot(), {}, k);
    for (NodeId v = 0; v < 8; ++v) {
      const double s0 = influence_oracle(a, labels, v, 0, k);
      const double s1 = influence_oracle(a, labels, v, 1, k);
      const double z = s0 + s1;
      if (z == 0.0) continue;
      const double qz = st.q.row(v).sum();
      EXPECT_NEAR(s0 / z, st.q(v, 0) / qz, 1e-10);
      EXPECT_NEAR(s1 / z, st.q(v, 1) / qz, 1e-10);
    }
  }
}

TEST(InfluenceOracle, SizeGuard) {
  Rng rng(5);
  const auto g = random_graph(21, 0.2, rng);
  const auto labels = simple_labels(21, 2, 2);
  EXPECT_THROW(influence_oracle(g, labels, 0, 0, 2), ConfigError);
}
