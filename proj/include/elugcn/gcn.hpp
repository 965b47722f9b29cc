#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "elugcn/checkpoint.hpp"
#include "elugcn/contrastive.hpp"
#include "elugcn/nn.hpp"
#include "elugcn/partition.hpp"

namespace elugcn {

struct GcnConfig {
  int hidden = 64;
  double lr = 0.05;
  int epochs = 300;
  double momentum = 0.9;
  double weight_decay = 5e-4;  // applied to W1 only
  std::uint64_t seed = 0;
};

// Two-layer GCN. In dual mode the same W1/W2 serve both branches.
struct GcnModel {
  DenseMatrix w1;  // d x hidden
  DenseMatrix w2;  // hidden x c
  std::uint64_t seed = 0;

  bool operator==(const GcnModel&) const = default;
};

inline GcnModel init_gcn(Eigen::Index d, int hidden, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  GcnModel m;
  m.w1 = glorot_uniform(d, hidden, rng);
  m.w2 = glorot_uniform(hidden, c, rng);
  m.seed = seed;
  return m;
}

// One branch, second_op · relu(first_op · X · W1) · W2, where first_op · X is
// supplied precomputed (it does not depend on the weights).
struct BranchForward {
  DenseMatrix pre;     // (first_op X) W1
  DenseMatrix hidden;  // relu(pre)
  DenseMatrix mixed;   // second_op hidden
  DenseMatrix logits;  // mixed W2
};

inline BranchForward branch_forward(const GcnModel& m, const DenseMatrix& propagated,
                                    const CsrMatrix& second_op) {
  require_shape(propagated.cols() == m.w1.rows(), "gcn: feature width differs from W1 rows");
  require_shape(second_op.cols() == propagated.rows(), "gcn: operator size differs from node count");
  BranchForward f;
  f.pre = propagated * m.w1;
  f.hidden = relu(f.pre);
  f.mixed = second_op.multiply(f.hidden);
  f.logits = f.mixed * m.w2;
  return f;
}

struct GcnGradients {
  DenseMatrix w1;
  DenseMatrix w2;
};

inline void branch_backward(const GcnModel& m, const DenseMatrix& propagated,
                            const CsrMatrix& second_op, const BranchForward& f,
                            const DenseMatrix& grad_logits, GcnGradients& g) {
  if (g.w1.size() == 0) g.w1 = DenseMatrix::Zero(m.w1.rows(), m.w1.cols());
  if (g.w2.size() == 0) g.w2 = DenseMatrix::Zero(m.w2.rows(), m.w2.cols());
  g.w2.noalias() += f.mixed.transpose() * grad_logits;
  const DenseMatrix grad_hidden = second_op.multiply_transposed(grad_logits * m.w2.transpose());
  g.w1.noalias() += propagated.transpose() * relu_backward(grad_hidden, f.pre);
}

// H̄ = Â relu(Â X W1) W2
inline DenseMatrix forward_single(const GcnModel& m, const CsrMatrix& a_hat, const DenseMatrix& x) {
  return branch_forward(m, a_hat.multiply(x), a_hat).logits;
}

inline DenseMatrix forward_single(const GcnModel& m, const NormalizedAdjacency& a_hat,
                                  const DenseMatrix& x) {
  return forward_single(m, a_hat.matrix, x);
}

// (H̄, H̃) with H̃ = Â relu(S* X W1) W2.
inline std::pair<DenseMatrix, DenseMatrix> forward_dual(const GcnModel& m, const CsrMatrix& a_hat,
                                                        const CsrMatrix& s_star,
                                                        const DenseMatrix& x) {
  return {branch_forward(m, a_hat.multiply(x), a_hat).logits,
          branch_forward(m, s_star.multiply(x), a_hat).logits};
}

inline double gcn_ce_loss(const DenseMatrix& logits, const LabelSet& labels,
                          const std::vector<NodeId>& idx) {
  return softmax_cross_entropy_value(logits, labels.labels, idx);
}

// GCN CE loss over idx with gradients w.r.t. W1, W2 (weight decay excluded).
inline double single_objective(const GcnModel& m, const DenseMatrix& propagated,
                               const CsrMatrix& a_hat, const LabelSet& labels,
                               const std::vector<NodeId>& idx, GcnGradients* grad = nullptr) {
  const auto f = branch_forward(m, propagated, a_hat);
  const auto ce = softmax_cross_entropy(f.logits, labels.labels, idx);
  if (grad) branch_backward(m, propagated, a_hat, f, ce.grad, *grad);
  return ce.loss;
}

// Inputs of the dual-branch objective that stay fixed during training.
struct DualInputs {
  const CsrMatrix& a_hat;
  DenseMatrix propagated_bar;    // Â X
  DenseMatrix propagated_tilde;  // S* X
  std::vector<NodeId> elu;
  std::vector<NodeId> nelu;      // includes nodes label propagation never reached
};

inline DualInputs make_dual_inputs(const CsrMatrix& a_hat, const CsrMatrix& s_star,
                                   const DenseMatrix& x, const EluPartition& p) {
  return DualInputs{a_hat, a_hat.multiply(x), s_star.multiply(x), p.v_elu,
                    p.nelu_with_no_signal()};
}

struct DualLoss {
  double total = 0.0;
  double fused_ce = 0.0;
  double contrastive = 0.0;
  DenseMatrix logits_bar;
  DenseMatrix logits_tilde;
};

struct DualGradients {
  GcnGradients gcn;
  DenseMatrix head;
};

// fused CE over idx + lambda * contrastive term, with gradients through both
// branches, the shared weights and the projection head.
inline DualLoss dual_objective(const GcnModel& m, const ProjectionHead& head,
                               const DualInputs& in, const LabelSet& labels,
                               const std::vector<NodeId>& idx, const ContrastiveConfig& cfg,
                               DualGradients* grad = nullptr) {
  const auto fb = branch_forward(m, in.propagated_bar, in.a_hat);
  const auto ft = branch_forward(m, in.propagated_tilde, in.a_hat);
  const bool with_grad = grad != nullptr;
  const auto ce = fused_cross_entropy(fb.logits, ft.logits, labels.labels, idx, cfg.eta_fuse, with_grad);

  DualLoss out;
  out.fused_ce = ce.loss;
  DenseMatrix grad_bar, grad_tilde;
  if (with_grad) {
    grad_bar = ce.grad_bar;
    grad_tilde = ce.grad_tilde;
  }
  if (cfg.lambda != 0.0) {
    const auto [pb, pt] = project(head, fb.logits, ft.logits);
    const auto con = contrastive_loss(pb.out, pt.out, in.elu, in.nelu, cfg.tau, cfg.gamma, with_grad);
    out.contrastive = con.value;
    if (with_grad) {
      const DenseMatrix dpb = relu_backward(cfg.lambda * con.grad_bar, pb.pre);
      const DenseMatrix dpt = relu_backward(cfg.lambda * con.grad_tilde, pt.pre);
      grad->head = fb.logits.transpose() * dpb + ft.logits.transpose() * dpt;
      grad_bar.noalias() += dpb * head.weight.transpose();
      grad_tilde.noalias() += dpt * head.weight.transpose();
    }
  } else if (with_grad) {
    grad->head = DenseMatrix::Zero(head.weight.rows(), head.weight.cols());
  }
  out.total = out.fused_ce + cfg.lambda * out.contrastive;
  if (with_grad) {
    grad->gcn = {};
    branch_backward(m, in.propagated_bar, in.a_hat, fb, grad_bar, grad->gcn);
    branch_backward(m, in.propagated_tilde, in.a_hat, ft, grad_tilde, grad->gcn);
  }
  out.logits_bar = fb.logits;
  out.logits_tilde = ft.logits;
  return out;
}

struct GcnTrainResult {
  GcnModel model;  // snapshot with the best validation accuracy
  std::vector<int> predictions;
  DenseMatrix probs;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

namespace detail {

// Higher validation accuracy wins; ties go to lower validation loss, then to
// the earlier epoch.
inline bool better_snapshot(const EpochRecord& rec, double best_acc, double best_loss) {
  return rec.val_acc > best_acc || (rec.val_acc == best_acc && rec.val_loss < best_loss);
}

}  // namespace detail

inline GcnTrainResult train_single(GcnModel m, const CsrMatrix& a_hat, const DenseMatrix& x,
                                   const LabelSet& labels, const GcnConfig& cfg) {
  if (labels.train.empty()) throw ConfigError("train_single: empty train split");
  const DenseMatrix propagated = a_hat.multiply(x);
  const auto& eval_idx = labels.val.empty() ? labels.train : labels.val;
  const MomentumDescent opt(cfg.lr, cfg.momentum);
  DenseMatrix v1, v2;
  GcnTrainResult res;
  res.model = m;
  double best_acc = -1.0, best_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto f = branch_forward(m, propagated, a_hat);
    const auto ce = softmax_cross_entropy(f.logits, labels.labels, labels.train);
    require_finite_loss(ce.loss, "train_single", epoch);
    const auto pred = argmax_rows(f.logits);
    EpochRecord rec{epoch, ce.loss, softmax_cross_entropy_value(f.logits, labels.labels, eval_idx),
                    accuracy(pred, labels.labels, labels.train),
                    accuracy(pred, labels.labels, eval_idx)};
    res.history.push_back(rec);
    if (detail::better_snapshot(rec, best_acc, best_loss)) {
      best_acc = rec.val_acc;
      best_loss = rec.val_loss;
      res.model = m;
      res.best_epoch = epoch;
    }
    GcnGradients g;
    branch_backward(m, propagated, a_hat, f, ce.grad, g);
    g.w1 += cfg.weight_decay * m.w1;
    opt.step(m.w1, g.w1, v1);
    opt.step(m.w2, g.w2, v2);
  }
  const DenseMatrix logits = branch_forward(res.model, propagated, a_hat).logits;
  res.probs = softmax_rows(logits);
  res.predictions = argmax_rows(logits);
  return res;
}

struct DualTrainResult {
  GcnModel model;
  ProjectionHead head;
  std::vector<int> predictions;  // argmax of the fused probabilities
  DenseMatrix probs;
  int best_epoch = 0;
  std::vector<EpochRecord> history;  // losses are the fused CE, without the contrastive term
  std::vector<double> objective;     // full training objective per epoch
};

inline DualTrainResult predict_dual(const GcnModel& m, const ProjectionHead& head,
                                    const DualInputs& in, double eta) {
  DualTrainResult r;
  r.model = m;
  r.head = head;
  const auto fb = branch_forward(m, in.propagated_bar, in.a_hat);
  const auto ft = branch_forward(m, in.propagated_tilde, in.a_hat);
  r.probs = fused_probs(fb.logits, ft.logits, eta);
  r.predictions = argmax_rows(r.probs);
  return r;
}

inline DualTrainResult train_dual(GcnModel m, ProjectionHead head, const DualInputs& in,
                                  const LabelSet& labels, const GcnConfig& cfg,
                                  const ContrastiveConfig& con) {
  if (labels.train.empty()) throw ConfigError("train_dual: empty train split");
  const auto& eval_idx = labels.val.empty() ? labels.train : labels.val;
  const MomentumDescent opt(cfg.lr, cfg.momentum);
  DenseMatrix v1, v2, vh;
  GcnModel best_model = m;
  ProjectionHead best_head = head;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  std::vector<double> objective;
  double best_acc = -1.0, best_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    DualGradients g;
    const auto loss = dual_objective(m, head, in, labels, labels.train, con, &g);
    require_finite_loss(loss.total, "train_dual", epoch);
    const DenseMatrix probs = fused_probs(loss.logits_bar, loss.logits_tilde, con.eta_fuse);
    const auto pred = argmax_rows(probs);
    EpochRecord rec{epoch, loss.fused_ce,
                    fused_cross_entropy(loss.logits_bar, loss.logits_tilde, labels.labels,
                                        eval_idx, con.eta_fuse)
                        .loss,
                    accuracy(pred, labels.labels, labels.train),
                    accuracy(pred, labels.labels, eval_idx)};
    history.push_back(rec);
    objective.push_back(loss.total);
    if (detail::better_snapshot(rec, best_acc, best_loss)) {
      best_acc = rec.val_acc;
      best_loss = rec.val_loss;
      best_model = m;
      best_head = head;
      best_epoch = epoch;
    }
    g.gcn.w1 += cfg.weight_decay * m.w1;
    opt.step(m.w1, g.gcn.w1, v1);
    opt.step(m.w2, g.gcn.w2, v2);
    opt.step(head.weight, g.head, vh);
  }
  DualTrainResult res = predict_dual(best_model, best_head, in, con.eta_fuse);
  res.best_epoch = best_epoch;
  res.history = std::move(history);
  res.objective = std::move(objective);
  return res;
}

inline Checkpoint to_checkpoint(const GcnModel& m) {
  return Checkpoint{"gcn", m.seed, {{"w1", m.w1}, {"w2", m.w2}}};
}

inline Checkpoint to_checkpoint(const GcnModel& m, const ProjectionHead& head) {
  return Checkpoint{"elugcn", m.seed, {{"w1", m.w1}, {"w2", m.w2}, {"head", head.weight}}};
}

inline GcnModel gcn_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != "gcn" && ck.kind != "elugcn")
    throw ConfigError("expected a gcn checkpoint, got '" + ck.kind + "'");
  GcnModel m{ck.tensor("w1"), ck.tensor("w2"), ck.seed};
  require_shape(m.w1.cols() == m.w2.rows(), "gcn checkpoint: inconsistent hidden width");
  return m;
}

}  // namespace elugcn
