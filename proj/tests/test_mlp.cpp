#include <gtest/gtest.h>

#include "elugcn/mlp.hpp"
#include "test_util.hpp"

using namespace elugcn;
using namespace elugcn::testing;

namespace {

struct Blobs {
  DenseMatrix x;
  LabelSet labels;
};

// Two well-separated Gaussian blobs in 4 dimensions.
Blobs separable_blobs(std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  b.labels = simple_labels(40, 2, 10);
  b.x.resize(40, 4);
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) b.x(i, j) = 0.3 * rng.normal();
    b.x(i, b.labels.labels[static_cast<std::size_t>(i)]) += 3.0;
  }
  return b;
}

}  // namespace

TEST(PretrainMlp, SeparableBlobsReachFullTrainAccuracy) {
  const auto b = separable_blobs(1);
  MlpConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 2;
  const auto res = pretrain_mlp(b.x, b.labels, cfg);
  // The returned snapshot is chosen on validation accuracy, so check the
  // training trajectory itself.
  EXPECT_EQ(res.history.back().train_acc, 1.0);
  EXPECT_TRUE(std::isfinite(res.history.back().train_loss));
  EXPECT_LT(res.history.back().train_loss, res.history.front().train_loss);
}

TEST(PretrainMlp, ZeroLearningRateKeepsInitialWeights) {
  const auto b = separable_blobs(3);
  MlpConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 20;
  cfg.seed = 4;
  const auto res = pretrain_mlp(b.x, b.labels, cfg);
  const auto init = init_mlp(4, cfg.hidden, 2, cfg.seed);
  EXPECT_EQ(res.model, init);
  const double init_acc =
      accuracy(argmax_rows(mlp_forward(init, b.x).logits), b.labels.labels, b.labels.val);
  EXPECT_EQ(res.history.back().val_acc, init_acc);
}

TEST(PretrainMlp, SeedDeterminism) {
  const auto b = separable_blobs(5);
  MlpConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 6;
  EXPECT_EQ(pretrain_mlp(b.x, b.labels, cfg).model, pretrain_mlp(b.x, b.labels, cfg).model);
}

TEST(PretrainMlp, ReturnsBestValidationSnapshot) {
  const auto b = separable_blobs(7);
  MlpConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 8;
  const auto res = pretrain_mlp(b.x, b.labels, cfg);
  double best = -1.0;
  for (const auto& r : res.history) best = std::max(best, r.val_acc);
  EXPECT_EQ(res.history[static_cast<std::size_t>(res.best_epoch)].val_acc, best);
  const auto pred = argmax_rows(mlp_forward(res.model, b.x).logits);
  EXPECT_EQ(accuracy(pred, b.labels.labels, b.labels.val), best);
}

TEST(PretrainMlp, TestLabelsDoNotLeak) {
  auto b = separable_blobs(9);
  MlpConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 10;
  const auto a = pretrain_mlp(b.x, b.labels, cfg);
  for (NodeId v : b.labels.test) {
    auto& l = b.labels.labels[static_cast<std::size_t>(v)];
    l = 1 - l;
  }
  EXPECT_EQ(pretrain_mlp(b.x, b.labels, cfg).model, a.model);
}

TEST(PretrainMlp, EmptyTrainRejected) {
  auto b = separable_blobs(11);
  b.labels.train.clear();
  EXPECT_THROW(pretrain_mlp(b.x, b.labels, MlpConfig{}), ConfigError);
}

TEST(MlpProbs, RowsAreDistributionsAndPointwise) {
  Rng rng(12);
  DenseMatrix x = random_matrix(6, 5, rng);
  x.row(3) = x.row(1);
  const auto m = init_mlp(5, 8, 3, 13);
  const DenseMatrix h = mlp_probs(m, x);
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(h.row(i).sum(), 1.0, 1e-12);
  EXPECT_EQ(h.row(3), h.row(1));
}

TEST(MlpGradient, FiniteDifferenceTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const DenseMatrix x = random_matrix(9, 4, rng);
    const auto labels = simple_labels(9, 3, 2);
    const auto m = init_mlp(4, 6, 3, seed);
    MlpGradients g;
    mlp_ce_loss(m, x, labels, labels.train, &g);
    const auto f1 = [&](const DenseMatrix& t1) {
      MlpModel p = m;
      p.theta1 = t1;
      return mlp_ce_loss(p, x, labels, labels.train);
    };
    const auto f2 = [&](const DenseMatrix& t2) {
      MlpModel p = m;
      p.theta2 = t2;
      return mlp_ce_loss(p, x, labels, labels.train);
    };
    EXPECT_LT(finite_diff_check(f1, g.theta1, m.theta1), 1e-4) << "seed " << seed;
    EXPECT_LT(finite_diff_check(f2, g.theta2, m.theta2), 1e-4) << "seed " << seed;
  }
}

TEST(MlpCheckpoint, RoundTrip) {
  const auto m = init_mlp(4, 5, 3, 0xFFFFFFFFFFFFFFFFULL);
  const auto back = mlp_from_checkpoint(parse_checkpoint(serialize_checkpoint(to_checkpoint(m))));
  EXPECT_EQ(back, m);
}

TEST(GlorotInit, WithinBound) {
  Rng rng(14);
  const DenseMatrix w = glorot_uniform(10, 6, rng);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 16.0));
}
