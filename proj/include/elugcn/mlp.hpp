#pragma once

#include <cstdint>
#include <vector>

#include "elugcn/checkpoint.hpp"
#include "elugcn/nn.hpp"

namespace elugcn {

struct MlpConfig {
  int hidden = 64;
  double lr = 0.1;
  int epochs = 200;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

// logits = relu(X Θ1) Θ2
struct MlpModel {
  DenseMatrix theta1;  // d x hidden
  DenseMatrix theta2;  // hidden x c
  std::uint64_t seed = 0;

  bool operator==(const MlpModel&) const = default;
};

struct MlpForward {
  DenseMatrix pre;     // X Θ1
  DenseMatrix hidden;  // relu(pre)
  DenseMatrix logits;
};

inline MlpModel init_mlp(Eigen::Index d, int hidden, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  MlpModel m;
  m.theta1 = glorot_uniform(d, hidden, rng);
  m.theta2 = glorot_uniform(hidden, c, rng);
  m.seed = seed;
  return m;
}

inline MlpForward mlp_forward(const MlpModel& m, const DenseMatrix& x) {
  require_shape(x.cols() == m.theta1.rows(), "mlp: feature dimension differs from Θ1 rows");
  MlpForward f;
  f.pre = x * m.theta1;
  f.hidden = relu(f.pre);
  f.logits = f.hidden * m.theta2;
  return f;
}

struct MlpGradients {
  DenseMatrix theta1;
  DenseMatrix theta2;
};

inline MlpGradients mlp_backward(const MlpModel& m, const DenseMatrix& x, const MlpForward& f,
                                 const DenseMatrix& grad_logits) {
  MlpGradients g;
  g.theta2 = f.hidden.transpose() * grad_logits;
  const DenseMatrix grad_pre = relu_backward(grad_logits * m.theta2.transpose(), f.pre);
  g.theta1 = x.transpose() * grad_pre;
  return g;
}

// Mean CE of the MLP over idx and its gradient (no weight decay).
inline double mlp_ce_loss(const MlpModel& m, const DenseMatrix& x, const LabelSet& labels,
                          const std::vector<NodeId>& idx, MlpGradients* grad = nullptr) {
  const auto f = mlp_forward(m, x);
  const auto ce = softmax_cross_entropy(f.logits, labels.labels, idx);
  if (grad) *grad = mlp_backward(m, x, f, ce.grad);
  return ce.loss;
}

// Rows are class-probability vectors: H = softmax(MLP(X)).
inline DenseMatrix mlp_probs(const MlpModel& m, const DenseMatrix& x) {
  return softmax_rows(mlp_forward(m, x).logits);
}

struct MlpTrainResult {
  MlpModel model;  // snapshot with the best validation accuracy
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

inline MlpTrainResult pretrain_mlp(const DenseMatrix& x, const LabelSet& labels,
                                   const MlpConfig& cfg) {
  if (labels.train.empty()) throw ConfigError("pretrain_mlp: empty train split");
  require_shape(x.rows() == labels.num_nodes(), "pretrain_mlp: feature rows differ from node count");
  MlpTrainResult res;
  MlpModel m = init_mlp(x.cols(), cfg.hidden, labels.num_classes, cfg.seed);
  res.model = m;
  const MomentumDescent opt(cfg.lr, cfg.momentum);
  DenseMatrix v1, v2;
  double best_val = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto f = mlp_forward(m, x);
    const auto ce = softmax_cross_entropy(f.logits, labels.labels, labels.train);
    require_finite_loss(ce.loss, "pretrain_mlp", epoch);
    const auto pred = argmax_rows(f.logits);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = ce.loss;
    rec.train_acc = accuracy(pred, labels.labels, labels.train);
    if (!labels.val.empty()) {
      rec.val_loss = softmax_cross_entropy_value(f.logits, labels.labels, labels.val);
      rec.val_acc = accuracy(pred, labels.labels, labels.val);
    } else {
      rec.val_acc = rec.train_acc;
    }
    res.history.push_back(rec);
    if (rec.val_acc > best_val) {
      best_val = rec.val_acc;
      res.model = m;
      res.best_epoch = epoch;
    }
    auto g = mlp_backward(m, x, f, ce.grad);
    g.theta1 += cfg.weight_decay * m.theta1;
    g.theta2 += cfg.weight_decay * m.theta2;
    opt.step(m.theta1, g.theta1, v1);
    opt.step(m.theta2, g.theta2, v2);
    if (!m.theta1.allFinite() || !m.theta2.allFinite())
      throw NumericError("pretrain_mlp: weights became non-finite at epoch " +
                         std::to_string(epoch));
  }
  return res;
}

inline Checkpoint to_checkpoint(const MlpModel& m) {
  return Checkpoint{"mlp", m.seed, {{"theta1", m.theta1}, {"theta2", m.theta2}}};
}

inline MlpModel mlp_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != "mlp") throw ConfigError("expected an mlp checkpoint, got '" + ck.kind + "'");
  MlpModel m{ck.tensor("theta1"), ck.tensor("theta2"), ck.seed};
  require_shape(m.theta1.cols() == m.theta2.rows(), "mlp checkpoint: inconsistent hidden width");
  return m;
}

}  // namespace elugcn
