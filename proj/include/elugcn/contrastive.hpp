#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "elugcn/nn.hpp"

namespace elugcn {

inline constexpr double kNormGuard = 1e-12;
inline constexpr double kLogClamp = 1e-12;

struct ContrastiveConfig {
  double tau = 0.1;
  double gamma = 0.1;
  double lambda = 0.1;
  double eta_fuse = 0.5;
  int proj_dim = 16;
};

// P = relu(H Wp); one head serves both branches.
struct ProjectionHead {
  DenseMatrix weight;  // c x d'

  bool operator==(const ProjectionHead&) const = default;
};

inline ProjectionHead init_projection_head(Eigen::Index c, int proj_dim, Rng& rng) {
  return ProjectionHead{glorot_uniform(c, proj_dim, rng)};
}

struct Projection {
  DenseMatrix pre;  // H Wp
  DenseMatrix out;  // relu(pre)
};

inline Projection project(const ProjectionHead& head, const DenseMatrix& h) {
  require_shape(h.cols() == head.weight.rows(), "project: input width differs from head");
  Projection p;
  p.pre = h * head.weight;
  p.out = relu(p.pre);
  return p;
}

inline std::pair<Projection, Projection> project(const ProjectionHead& head,
                                                 const DenseMatrix& h_bar,
                                                 const DenseMatrix& h_tilde) {
  require_shape(h_bar.rows() == h_tilde.rows() && h_bar.cols() == h_tilde.cols(),
                "project: branch outputs differ in shape");
  return {project(head, h_bar), project(head, h_tilde)};
}

// Rows scaled by 1/sqrt(|row|^2 + guard); zero rows stay zero.
inline DenseMatrix normalize_rows(const DenseMatrix& p) {
  DenseMatrix out = p;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    out.row(i) /= std::sqrt(p.row(i).squaredNorm() + kNormGuard);
  return out;
}

// Columns centered, then scaled by 1/sqrt(|col|^2 + guard), so Z^T Z is the
// correlation matrix of the projection dimensions.
inline DenseMatrix standardize_columns(const DenseMatrix& p, Vector* scale = nullptr) {
  DenseMatrix z = p.rowwise() - p.colwise().mean();
  Vector s(p.cols());
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    s(k) = std::sqrt(z.col(k).squaredNorm() + kNormGuard);
    z.col(k) /= s(k);
  }
  if (scale) *scale = s;
  return z;
}

struct ContrastiveLoss {
  double value = 0.0;
  double alignment = 0.0;   // -log E / (E + N)
  double uniformity = 0.0;  // gamma * logsumexp(Gram sum)
  DenseMatrix grad_bar;     // d value / d P̄ (filled when requested)
  DenseMatrix grad_tilde;
};

namespace detail {

inline double lse_of(const std::vector<double>& v) {
  return logsumexp(std::span<const double>(v.data(), v.size()));
}

// Gradient of the uniformity term w.r.t. one raw projection given dZ.
inline DenseMatrix standardize_backward(const DenseMatrix& p, const Vector& scale,
                                        const DenseMatrix& grad_z) {
  DenseMatrix centered = p.rowwise() - p.colwise().mean();
  DenseMatrix grad_c(p.rows(), p.cols());
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    const double s = scale(k);
    const double dot = centered.col(k).dot(grad_z.col(k));
    grad_c.col(k) = grad_z.col(k) / s - centered.col(k) * (dot / (s * s * s));
  }
  return grad_c.rowwise() - grad_c.colwise().mean();
}

}  // namespace detail

// Cosine-similarity contrast between matched rows of the two projections:
// ELU pairs pulled together, NELU pairs pushed apart, plus a logsumexp
// penalty on the summed correlation matrices that spreads the projection
// dimensions. An empty ELU set gives a zero alignment term; an empty NELU set
// contributes N = 0.
inline ContrastiveLoss contrastive_loss(const DenseMatrix& p_bar, const DenseMatrix& p_tilde,
                                        const std::vector<NodeId>& elu,
                                        const std::vector<NodeId>& nelu, double tau, double gamma,
                                        bool with_grad = false) {
  if (!(tau > 0.0)) throw ConfigError("contrastive_loss: tau must be > 0");
  require_shape(p_bar.rows() == p_tilde.rows() && p_bar.cols() == p_tilde.cols(),
                "contrastive_loss: projections differ in shape");
  ContrastiveLoss out;
  if (with_grad) {
    out.grad_bar = DenseMatrix::Zero(p_bar.rows(), p_bar.cols());
    out.grad_tilde = DenseMatrix::Zero(p_bar.rows(), p_bar.cols());
  }

  const DenseMatrix u_bar = normalize_rows(p_bar);
  const DenseMatrix u_tilde = normalize_rows(p_tilde);
  auto scaled_sims = [&](const std::vector<NodeId>& set) {
    std::vector<double> s;
    s.reserve(set.size());
    for (NodeId v : set) s.push_back(u_bar.row(v).dot(u_tilde.row(v)) / tau);
    return s;
  };

  if (!elu.empty()) {
    const auto s_elu = scaled_sims(elu);
    const auto s_nelu = scaled_sims(nelu);
    const double log_e = detail::lse_of(s_elu) - std::log(static_cast<double>(elu.size()));
    double w_n = 0.0;  // N / (E + N)
    if (!nelu.empty()) {
      const double log_n = detail::lse_of(s_nelu) - std::log(static_cast<double>(nelu.size()));
      const double hi = std::max(log_e, log_n);
      const double log_total = hi + std::log(std::exp(log_e - hi) + std::exp(log_n - hi));
      out.alignment = log_total - log_e;
      w_n = std::exp(log_n - log_total);
    }
    if (with_grad) {
      auto accumulate = [&](const std::vector<NodeId>& set, const std::vector<double>& s,
                            double coef) {
        const double lse = detail::lse_of(s);
        for (std::size_t t = 0; t < set.size(); ++t) {
          const NodeId v = set[t];
          const double d_sim = coef * std::exp(s[t] - lse) / tau;
          const double sim = s[t] * tau;
          const double r_bar = std::sqrt(p_bar.row(v).squaredNorm() + kNormGuard);
          const double r_tilde = std::sqrt(p_tilde.row(v).squaredNorm() + kNormGuard);
          out.grad_bar.row(v) += d_sim * (u_tilde.row(v) - sim * u_bar.row(v)) / r_bar;
          out.grad_tilde.row(v) += d_sim * (u_bar.row(v) - sim * u_tilde.row(v)) / r_tilde;
        }
      };
      accumulate(elu, s_elu, -w_n);
      if (!nelu.empty()) accumulate(nelu, s_nelu, w_n);
    }
  }

  Vector scale_bar, scale_tilde;
  const DenseMatrix z_bar = standardize_columns(p_bar, &scale_bar);
  const DenseMatrix z_tilde = standardize_columns(p_tilde, &scale_tilde);
  const DenseMatrix gram = z_bar.transpose() * z_bar + z_tilde.transpose() * z_tilde;
  const double lse = logsumexp(std::span<const double>(gram.data(), static_cast<std::size_t>(gram.size())));
  out.uniformity = gamma * lse;
  if (with_grad && gamma != 0.0) {
    const DenseMatrix omega = gamma * (gram.array() - lse).exp().matrix();
    const DenseMatrix sym = omega + omega.transpose();
    out.grad_bar += detail::standardize_backward(p_bar, scale_bar, z_bar * sym);
    out.grad_tilde += detail::standardize_backward(p_tilde, scale_tilde, z_tilde * sym);
  }
  out.value = out.alignment + out.uniformity;
  return out;
}

struct FusedCe {
  double loss = 0.0;
  DenseMatrix grad_bar;    // d loss / d H̄ logits
  DenseMatrix grad_tilde;  // d loss / d H̃ logits
};

// (1 - eta) softmax(H̄) + eta softmax(H̃), class probability clamped at 1e-12
// before the log.
inline DenseMatrix fused_probs(const DenseMatrix& h_bar, const DenseMatrix& h_tilde, double eta) {
  return (1.0 - eta) * softmax_rows(h_bar) + eta * softmax_rows(h_tilde);
}

inline FusedCe fused_cross_entropy(const DenseMatrix& h_bar, const DenseMatrix& h_tilde,
                                   const std::vector<int>& labels, const std::vector<NodeId>& idx,
                                   double eta, bool with_grad = false) {
  if (idx.empty()) throw ConfigError("fused loss: empty index set");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("fused loss: eta_fuse must lie in [0, 1]");
  const DenseMatrix s_bar = softmax_rows(h_bar);
  const DenseMatrix s_tilde = softmax_rows(h_tilde);
  FusedCe out;
  if (with_grad) {
    out.grad_bar = DenseMatrix::Zero(h_bar.rows(), h_bar.cols());
    out.grad_tilde = DenseMatrix::Zero(h_bar.rows(), h_bar.cols());
  }
  const double inv_m = 1.0 / static_cast<double>(idx.size());
  CompensatedSum total;
  for (NodeId v : idx) {
    const int y = labels[static_cast<std::size_t>(v)];
    if (y < 0 || y >= h_bar.cols()) throw ConfigError("fused loss: node without a class");
    const double p = (1.0 - eta) * s_bar(v, y) + eta * s_tilde(v, y);
    total.add(-std::log(std::max(p, kLogClamp)));
    if (with_grad && p > kLogClamp) {
      const double g = -inv_m / p;
      DenseMatrix::RowXpr gb = out.grad_bar.row(v);
      gb = -s_bar.row(v) * s_bar(v, y);
      gb(y) += s_bar(v, y);
      gb *= g * (1.0 - eta);
      DenseMatrix::RowXpr gt = out.grad_tilde.row(v);
      gt = -s_tilde.row(v) * s_tilde(v, y);
      gt(y) += s_tilde(v, y);
      gt *= g * eta;
    }
  }
  out.loss = total.value() * inv_m;
  return out;
}

inline double fused_loss(const DenseMatrix& h_bar, const DenseMatrix& h_tilde,
                         const std::vector<int>& labels, const std::vector<NodeId>& idx,
                         double eta_fuse, double lambda, double contrastive_value) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("fused loss: lambda must lie in [0, 1]");
  return fused_cross_entropy(h_bar, h_tilde, labels, idx, eta_fuse).loss +
         lambda * contrastive_value;
}

}  // namespace elugcn
