#pragma once

#include <cmath>
#include <vector>

#include "elugcn/graph.hpp"
#include "elugcn/rng.hpp"

namespace elugcn {

// Uniform in ±sqrt(6 / (fan_in + fan_out)).
inline DenseMatrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

inline DenseMatrix relu(const DenseMatrix& z) { return z.cwiseMax(0.0); }

// Zeroes the gradient where the pre-activation was not positive.
inline DenseMatrix relu_backward(const DenseMatrix& grad, const DenseMatrix& pre) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

struct LossAndGrad {
  double loss = 0.0;
  DenseMatrix grad;  // d loss / d logits, zero outside the index set
};

// Mean softmax cross-entropy over `idx`.
inline LossAndGrad softmax_cross_entropy(const DenseMatrix& logits, const std::vector<int>& labels,
                                         const std::vector<NodeId>& idx) {
  if (idx.empty()) throw ConfigError("cross-entropy: empty index set");
  LossAndGrad out;
  out.grad = DenseMatrix::Zero(logits.rows(), logits.cols());
  const double inv_m = 1.0 / static_cast<double>(idx.size());
  CompensatedSum total;
  for (NodeId v : idx) {
    const int y = labels[static_cast<std::size_t>(v)];
    if (y < 0 || y >= logits.cols()) throw ConfigError("cross-entropy: node without a class");
    const auto row = logits.row(v);
    const double lse =
        logsumexp(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    total.add(lse - row(y));
    for (Eigen::Index j = 0; j < row.size(); ++j) out.grad(v, j) = std::exp(row(j) - lse) * inv_m;
    out.grad(v, y) -= inv_m;
  }
  out.loss = total.value() * inv_m;
  return out;
}

inline double softmax_cross_entropy_value(const DenseMatrix& logits,
                                          const std::vector<int>& labels,
                                          const std::vector<NodeId>& idx) {
  return softmax_cross_entropy(logits, labels, idx).loss;
}

inline std::vector<int> argmax_rows(const DenseMatrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out[static_cast<std::size_t>(i)] = static_cast<int>(argmax_lowest(m.row(i)));
  return out;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                       const std::vector<NodeId>& idx) {
  if (idx.empty()) return 0.0;
  std::size_t hit = 0;
  for (NodeId v : idx)
    if (pred[static_cast<std::size_t>(v)] == truth[static_cast<std::size_t>(v)]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

// Full-batch gradient descent with heavy-ball momentum: v <- mu v + g, w <- w - lr v.
class MomentumDescent {
 public:
  MomentumDescent(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(DenseMatrix& param, const DenseMatrix& grad, DenseMatrix& velocity) const {
    if (velocity.size() == 0) velocity = DenseMatrix::Zero(param.rows(), param.cols());
    velocity = momentum_ * velocity + grad;
    param.noalias() -= lr_ * velocity;
  }

 private:
  double lr_;
  double momentum_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

inline void require_finite_loss(double loss, const char* who, int epoch) {
  if (!std::isfinite(loss))
    throw NumericError(std::string(who) + ": loss became non-finite at epoch " +
                       std::to_string(epoch) + " (try a smaller learning rate)");
}

}  // namespace elugcn
