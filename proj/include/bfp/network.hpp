#pragma once

#include <cstdint>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/matrix.hpp"
#include "bfp/rng.hpp"

namespace bfp {

/// One affine map y = W x + b. Also reused as the value container for its
/// own gradients (same shapes).
struct AffineLayer {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out

  AffineLayer() = default;
  AffineLayer(std::size_t out, std::size_t in)
      : weight(out, in), bias(out, 0.0) {}

  std::size_t out_dim() const { return weight.rows; }
  std::size_t in_dim() const { return weight.cols; }
};

/// Feature extractor (affine stack, ReLU between layers, last layer linear)
/// plus a linear classification head mapping features to class logits.
struct NetworkParams {
  std::vector<AffineLayer> features;
  AffineLayer head;  // class_count x feature_dim

  std::size_t input_dim() const { return features.front().in_dim(); }
  std::size_t feature_dim() const { return features.back().out_dim(); }
  std::size_t class_count() const { return head.out_dim(); }
};

/// Gradient tree with the same shapes as NetworkParams.
struct NetworkGrads {
  std::vector<AffineLayer> features;
  AffineLayer head;
};

inline NetworkGrads zero_grads(const NetworkParams& p) {
  NetworkGrads g;
  g.features.reserve(p.features.size());
  for (const auto& l : p.features) g.features.emplace_back(l.out_dim(), l.in_dim());
  g.head = AffineLayer(p.head.out_dim(), p.head.in_dim());
  return g;
}

/// Glorot-uniform network: weights uniform in +-sqrt(6/(fan_in+fan_out)),
/// biases zero. dims lists the feature extractor sizes (input first, feature
/// dimension last); the head maps feature_dim -> class_count. Deterministic
/// in seed.
inline NetworkParams init_params(const std::vector<std::size_t>& dims,
                                 std::size_t class_count, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidInput("init_params: need at least two layer sizes");
  for (std::size_t d : dims)
    if (d == 0) throw InvalidInput("init_params: zero layer size");
  if (class_count == 0) throw InvalidInput("init_params: zero class count");

  Rng rng(seed);
  auto glorot = [&](std::size_t out, std::size_t in) {
    AffineLayer l(out, in);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : l.weight.data) w = rng.uniform(-limit, limit);
    return l;
  };

  NetworkParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    p.features.push_back(glorot(dims[i + 1], dims[i]));
  p.head = glorot(class_count, dims.back());
  return p;
}

/// Intermediates of one forward pass, sufficient for backward.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to each feature layer
  std::vector<Matrix> preacts;       // pre-activation of each feature layer
};

namespace detail {

inline Matrix affine_forward(const AffineLayer& l, const Matrix& x) {
  if (x.rows != l.in_dim())
    throw InvalidInput("affine forward: input rows do not match layer width");
  Matrix y = matmul(l.weight, x);
  for (std::size_t i = 0; i < y.rows; ++i) {
    const double b = l.bias[i];
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += b;
  }
  return y;
}

}  // namespace detail

/// z = h(x) for an input batch (columns are examples), with cache.
inline Matrix forward_features(const NetworkParams& p, const Matrix& x,
                               ForwardCache& cache) {
  cache.layer_inputs.clear();
  cache.preacts.clear();
  Matrix act = x;
  for (std::size_t l = 0; l < p.features.size(); ++l) {
    cache.layer_inputs.push_back(act);
    Matrix pre = detail::affine_forward(p.features[l], act);
    cache.preacts.push_back(pre);
    if (l + 1 < p.features.size())
      for (double& v : pre.data) v = v > 0.0 ? v : 0.0;  // ReLU
    act = std::move(pre);
  }
  return act;
}

/// Forward without keeping intermediates (evaluation, frozen teachers).
inline Matrix features_only(const NetworkParams& p, const Matrix& x) {
  ForwardCache scratch;
  return forward_features(p, x, scratch);
}

/// o = W z + b per column.
inline Matrix forward_logits(const AffineLayer& head, const Matrix& z) {
  if (z.rows != head.in_dim())
    throw InvalidInput("forward_logits: feature rows do not match head width");
  return detail::affine_forward(head, z);
}

inline Matrix logits_only(const NetworkParams& p, const Matrix& x) {
  return forward_logits(p.head, features_only(p, x));
}

/// Backprop dL/dlogits through the head; accumulates head gradients into g
/// and returns dL/dz.
inline Matrix head_backward(const AffineLayer& head, const Matrix& z,
                            const Matrix& dlogits, AffineLayer& g) {
  if (dlogits.rows != head.out_dim() || z.cols != dlogits.cols)
    throw InvalidInput("head_backward: shape mismatch");
  Matrix dw = matmul_a_bt(dlogits, z);
  for (std::size_t k = 0; k < dw.data.size(); ++k) g.weight.data[k] += dw.data[k];
  for (std::size_t i = 0; i < dlogits.rows; ++i)
    for (std::size_t j = 0; j < dlogits.cols; ++j) g.bias[i] += dlogits(i, j);
  return matmul_at_b(head.weight, dlogits);
}

/// Backprop dL/dz through the feature stack; accumulates into g.
/// The cache must come from a forward pass of the same parameters on the
/// same batch (shape mismatches raise InvalidState).
inline void features_backward(const NetworkParams& p, const ForwardCache& cache,
                              const Matrix& dz, NetworkGrads& g) {
  if (cache.preacts.size() != p.features.size() || cache.preacts.empty())
    throw InvalidState("features_backward: cache does not match network");
  if (dz.rows != p.feature_dim() || dz.cols != cache.preacts.back().cols)
    throw InvalidState("features_backward: upstream gradient shape mismatch");

  Matrix grad = dz;
  for (std::size_t l = p.features.size(); l-- > 0;) {
    if (cache.layer_inputs[l].rows != p.features[l].in_dim())
      throw InvalidState("features_backward: cached input width mismatch");
    Matrix dw = matmul_a_bt(grad, cache.layer_inputs[l]);
    for (std::size_t k = 0; k < dw.data.size(); ++k)
      g.features[l].weight.data[k] += dw.data[k];
    for (std::size_t i = 0; i < grad.rows; ++i)
      for (std::size_t j = 0; j < grad.cols; ++j) g.features[l].bias[i] += grad(i, j);
    if (l == 0) break;
    grad = matmul_at_b(p.features[l].weight, grad);
    const Matrix& pre = cache.preacts[l - 1];  // ReLU preceded this layer
    for (std::size_t k = 0; k < grad.data.size(); ++k)
      if (pre.data[k] <= 0.0) grad.data[k] = 0.0;
  }
}

inline void add_scaled(NetworkGrads& acc, const NetworkGrads& g, double s) {
  for (std::size_t l = 0; l < acc.features.size(); ++l) {
    for (std::size_t k = 0; k < acc.features[l].weight.data.size(); ++k)
      acc.features[l].weight.data[k] += s * g.features[l].weight.data[k];
    for (std::size_t k = 0; k < acc.features[l].bias.size(); ++k)
      acc.features[l].bias[k] += s * g.features[l].bias[k];
  }
  for (std::size_t k = 0; k < acc.head.weight.data.size(); ++k)
    acc.head.weight.data[k] += s * g.head.weight.data[k];
  for (std::size_t k = 0; k < acc.head.bias.size(); ++k)
    acc.head.bias[k] += s * g.head.bias[k];
}

// ---- optimizers ----

/// p <- p - lr * g, elementwise.
inline void sgd_update(double* p, const double* g, std::size_t n, double lr) {
  for (std::size_t k = 0; k < n; ++k) p[k] -= lr * g[k];
}

/// Classical momentum: v <- mu*v + g; p <- p - lr*v.
inline void momentum_update(double* v, double* p, const double* g, std::size_t n,
                            double lr, double mu) {
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = mu * v[k] + g[k];
    p[k] -= lr * v[k];
  }
}

inline void sgd_step(NetworkParams& p, const NetworkGrads& g, double lr) {
  if (g.features.size() != p.features.size())
    throw InvalidInput("sgd_step: gradient layer count mismatch");
  for (std::size_t l = 0; l < p.features.size(); ++l) {
    if (!same_shape(p.features[l].weight, g.features[l].weight))
      throw InvalidInput("sgd_step: weight shape mismatch");
    sgd_update(p.features[l].weight.data.data(), g.features[l].weight.data.data(),
               p.features[l].weight.size(), lr);
    sgd_update(p.features[l].bias.data(), g.features[l].bias.data(),
               p.features[l].bias.size(), lr);
  }
  if (!same_shape(p.head.weight, g.head.weight))
    throw InvalidInput("sgd_step: head shape mismatch");
  sgd_update(p.head.weight.data.data(), g.head.weight.data.data(),
             p.head.weight.size(), lr);
  sgd_update(p.head.bias.data(), g.head.bias.data(), p.head.bias.size(), lr);
}

// ---- backward feature projector ----

enum class ProjectorKind { Identity, Linear, TwoLayer };

/// Learnable map from the bias-augmented live feature [z; 1] back to the
/// frozen previous-task feature. Identity keeps z as-is (the FD ablation);
/// Linear is a single d x (d+1) matrix; TwoLayer inserts a ReLU hidden layer
/// of width d, both layers consuming a bias-augmented input.
struct Projector {
  ProjectorKind kind = ProjectorKind::Identity;
  Matrix a;   // Linear: d x (d+1)
  Matrix w1;  // TwoLayer: d x (d+1)
  Matrix w2;  // TwoLayer: d x (d+1)
};

struct ProjectorGrads {
  Matrix a, w1, w2;
};

inline ProjectorGrads zero_grads(const Projector& p) {
  ProjectorGrads g;
  g.a = Matrix(p.a.rows, p.a.cols);
  g.w1 = Matrix(p.w1.rows, p.w1.cols);
  g.w2 = Matrix(p.w2.rows, p.w2.cols);
  return g;
}

/// Fresh projector, entries uniform in +-1/sqrt(d+1). Re-drawn at every
/// task boundary by the trainer.
inline Projector init_projector(ProjectorKind kind, std::size_t d, std::uint64_t seed) {
  Projector p;
  p.kind = kind;
  if (kind == ProjectorKind::Identity) return p;
  Rng rng(seed);
  const double limit = 1.0 / std::sqrt(static_cast<double>(d + 1));
  auto fill = [&](Matrix& m) {
    m = Matrix(d, d + 1);
    for (double& v : m.data) v = rng.uniform(-limit, limit);
  };
  if (kind == ProjectorKind::Linear) {
    fill(p.a);
  } else {
    fill(p.w1);
    fill(p.w2);
  }
  return p;
}

/// Momentum state for a projector (velocity buffers plus hyperparameters).
struct ProjectorOptimizer {
  double lr = 0.1;
  double momentum = 0.9;
  ProjectorGrads velocity;
};

inline ProjectorOptimizer init_projector_optimizer(const Projector& p, double lr,
                                                   double momentum) {
  if (momentum < 0.0 || momentum >= 1.0)
    throw InvalidInput("projector optimizer: momentum must be in [0,1)");
  return ProjectorOptimizer{lr, momentum, zero_grads(p)};
}

inline void sgd_momentum_step(ProjectorOptimizer& opt, Projector& p,
                              const ProjectorGrads& g) {
  auto step = [&](Matrix& vel, Matrix& param, const Matrix& grad) {
    if (!same_shape(param, grad)) throw InvalidInput("sgd_momentum_step: shape mismatch");
    momentum_update(vel.data.data(), param.data.data(), grad.data.data(),
                    param.size(), opt.lr, opt.momentum);
  };
  if (p.kind == ProjectorKind::Linear) step(opt.velocity.a, p.a, g.a);
  if (p.kind == ProjectorKind::TwoLayer) {
    step(opt.velocity.w1, p.w1, g.w1);
    step(opt.velocity.w2, p.w2, g.w2);
  }
}

}  // namespace bfp
