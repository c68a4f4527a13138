#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/matrix.hpp"
#include "bfp/network.hpp"

namespace bfp {

/// Weights of the replay cross-entropy, logit distillation and backward
/// projection terms in the total training loss.
struct LossWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // w.r.t. the first argument
};

/// Mean over the batch of -log softmax(logits)[label]. Gradient w.r.t.
/// logits is (softmax - one_hot) / batch.
inline LossAndGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.cols)
    throw InvalidInput("cross_entropy: label count does not match batch");
  const std::size_t c = logits.rows, n = logits.cols;
  LossAndGrad out;
  out.grad = Matrix(c, n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const int y = labels[j];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw InvalidInput("cross_entropy: label out of range");
    double mx = logits(0, j);
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) sum += std::exp(logits(i, j) - mx);
    const double logz = mx + std::log(sum);
    total += logz - logits(static_cast<std::size_t>(y), j);
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < c; ++i)
      out.grad(i, j) = (std::exp(logits(i, j) - logz) -
                        (static_cast<std::size_t>(y) == i ? 1.0 : 0.0)) * invn;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

/// Mean squared Euclidean distance between live and recorded logits.
/// The teacher side receives no gradient.
inline LossAndGrad logit_distill(const Matrix& logits, const Matrix& old_logits) {
  if (!same_shape(logits, old_logits))
    throw InvalidInput("logit_distill: shape mismatch");
  const double invn = 1.0 / static_cast<double>(logits.cols);
  LossAndGrad out;
  out.grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  for (std::size_t k = 0; k < logits.data.size(); ++k) {
    const double d = logits.data[k] - old_logits.data[k];
    total += d * d;
    out.grad.data[k] = 2.0 * d * invn;
  }
  out.loss = total * invn;
  return out;
}

/// Value and gradients of the backward feature projection loss:
/// mean over the batch of sqrt(||p([z;1]) - z_old||^2 + eps). The frozen
/// teacher features z_old never receive a gradient.
struct BfpResult {
  double loss = 0.0;
  Matrix dz;            // d x batch
  ProjectorGrads dproj;  // zero-shaped for Identity
};

inline BfpResult bfp_loss(const Projector& proj, const Matrix& z, const Matrix& z_old) {
  if (!same_shape(z, z_old)) throw InvalidInput("bfp_loss: feature shape mismatch");
  const std::size_t d = z.rows, n = z.cols;
  if (proj.kind == ProjectorKind::Linear && (proj.a.rows != d || proj.a.cols != d + 1))
    throw InvalidInput("bfp_loss: projector shape does not match feature dim");
  if (proj.kind == ProjectorKind::TwoLayer &&
      (proj.w1.rows != d || proj.w1.cols != d + 1 || proj.w2.rows != d ||
       proj.w2.cols != d + 1))
    throw InvalidInput("bfp_loss: two-layer projector shape mismatch");
  constexpr double kEps = 1e-12;

  // Bias-augmented input [z; 1].
  Matrix zhat(d + 1, n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) zhat(i, j) = z(i, j);
  for (std::size_t j = 0; j < n; ++j) zhat(d, j) = 1.0;

  Matrix hidden;  // TwoLayer: [relu(w1 zhat); 1]
  Matrix projected;
  switch (proj.kind) {
    case ProjectorKind::Identity:
      projected = z;
      break;
    case ProjectorKind::Linear:
      projected = matmul(proj.a, zhat);
      break;
    case ProjectorKind::TwoLayer: {
      Matrix pre = matmul(proj.w1, zhat);
      hidden = Matrix(d + 1, n);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j)
          hidden(i, j) = pre(i, j) > 0.0 ? pre(i, j) : 0.0;
      for (std::size_t j = 0; j < n; ++j) hidden(d, j) = 1.0;
      projected = matmul(proj.w2, hidden);
      break;
    }
  }

  BfpResult out;
  out.dproj = zero_grads(proj);
  Matrix dproj_out(d, n);  // dL/d(projected)
  const double invn = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = projected(i, j) - z_old(i, j);
      sq += r * r;
    }
    const double len = std::sqrt(sq + kEps);
    out.loss += len * invn;
    const double scale = invn / len;
    for (std::size_t i = 0; i < d; ++i)
      dproj_out(i, j) = (projected(i, j) - z_old(i, j)) * scale;
  }

  switch (proj.kind) {
    case ProjectorKind::Identity:
      out.dz = std::move(dproj_out);
      break;
    case ProjectorKind::Linear: {
      out.dproj.a = matmul_a_bt(dproj_out, zhat);
      Matrix dzhat = matmul_at_b(proj.a, dproj_out);
      out.dz = Matrix(d, n);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j) out.dz(i, j) = dzhat(i, j);
      break;
    }
    case ProjectorKind::TwoLayer: {
      out.dproj.w2 = matmul_a_bt(dproj_out, hidden);
      Matrix dhidden = matmul_at_b(proj.w2, dproj_out);  // (d+1) x n
      Matrix dpre(d, n);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j)
          dpre(i, j) = hidden(i, j) > 0.0 ? dhidden(i, j) : 0.0;
      out.dproj.w1 = matmul_a_bt(dpre, zhat);
      Matrix dzhat = matmul_at_b(proj.w1, dpre);
      out.dz = Matrix(d, n);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j) out.dz(i, j) = dzhat(i, j);
      break;
    }
  }
  return out;
}

/// L_ce + alpha * L_rep_ce + beta * L_rep_logit + gamma * L_bfp.
inline double total_loss(const LossWeights& w, double ce, double rep_ce,
                         double rep_logit, double bfp) {
  return ce + w.alpha * rep_ce + w.beta * rep_logit + w.gamma * bfp;
}

/// Argmax over the logits restricted to the given classes; ties break to the
/// lowest class index.
inline int task_il_mask(const std::vector<double>& logits,
                        const std::vector<int>& task_classes) {
  if (task_classes.empty()) throw InvalidInput("task_il_mask: empty class set");
  int best = -1;
  double best_v = 0.0;
  for (int c : task_classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= logits.size())
      throw InvalidInput("task_il_mask: class outside logit range");
    const double v = logits[static_cast<std::size_t>(c)];
    if (best < 0 || v > best_v || (v == best_v && c < best)) {
      best = c;
      best_v = v;
    }
  }
  return best;
}

}  // namespace bfp
