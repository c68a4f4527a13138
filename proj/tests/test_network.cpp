#include <catch2/catch_amalgamated.hpp>
#include <cstdio>

#include "bfp/io.hpp"
#include "bfp/losses.hpp"
#include "bfp/network.hpp"
#include "bfp/rng.hpp"

using namespace bfp;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(xs.size(), 1);
  std::size_t i = 0;
  for (double v : xs) m(i++, 0) = v;
  return m;
}

// Flat views over every network parameter, for finite differencing.
std::vector<double*> param_view(NetworkParams& p) {
  std::vector<double*> out;
  for (auto& l : p.features) {
    for (double& v : l.weight.data) out.push_back(&v);
    for (double& v : l.bias) out.push_back(&v);
  }
  for (double& v : p.head.weight.data) out.push_back(&v);
  for (double& v : p.head.bias) out.push_back(&v);
  return out;
}

std::vector<double> grad_flat(const NetworkGrads& g) {
  std::vector<double> out;
  for (const auto& l : g.features) {
    out.insert(out.end(), l.weight.data.begin(), l.weight.data.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  out.insert(out.end(), g.head.weight.data.begin(), g.head.weight.data.end());
  out.insert(out.end(), g.head.bias.begin(), g.head.bias.end());
  return out;
}

}  // namespace

TEST_CASE("init_params is deterministic with zero biases", "[network]") {
  const NetworkParams a = init_params({4, 3}, 2, 99);
  const NetworkParams b = init_params({4, 3}, 2, 99);
  CHECK(a.features[0].weight.data == b.features[0].weight.data);
  CHECK(a.head.weight.data == b.head.weight.data);
  for (double v : a.features[0].bias) CHECK(v == 0.0);
  for (double v : a.head.bias) CHECK(v == 0.0);
  CHECK_THROWS_AS(init_params({4, 0}, 2, 1), InvalidInput);
}

TEST_CASE("init_params matches the Glorot-uniform spread", "[network]") {
  const NetworkParams p = init_params({100, 50}, 2, 5);
  const Matrix& w = p.features[0].weight;
  double mean = 0.0;
  for (double v : w.data) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size() - 1);
  const double limit = std::sqrt(6.0 / 150.0);
  const double expected_std = limit / std::sqrt(3.0);  // std of U(-limit, limit)
  CHECK(std::sqrt(var) == Catch::Approx(expected_std).epsilon(0.20));
}

TEST_CASE("forward matches hand-computed affine relu cases", "[network]") {
  // Single linear layer W = [[1, 2]], b = [0], x = (3, 4) -> z = (11).
  NetworkParams p;
  p.features.push_back(AffineLayer(1, 2));
  p.features[0].weight = Matrix::from_rows({{1.0, 2.0}});
  p.head = AffineLayer(1, 1);
  ForwardCache cache;
  const Matrix z = forward_features(p, column({3.0, 4.0}), cache);
  CHECK(z(0, 0) == Catch::Approx(11.0));

  // All-zero parameters give zero features.
  NetworkParams zero = init_params({3, 4, 2}, 2, 0);
  for (auto& l : zero.features) l.weight = Matrix(l.weight.rows, l.weight.cols);
  const Matrix zz = forward_features(zero, column({1.0, -2.0, 0.5}), cache);
  for (double v : zz.data) CHECK(v == 0.0);

  // ReLU zeroes negative pre-activations.
  NetworkParams relu_net;
  relu_net.features.push_back(AffineLayer(2, 1));
  relu_net.features.push_back(AffineLayer(2, 2));
  relu_net.features[0].weight = Matrix::from_rows({{-1.0}, {-2.0}});
  relu_net.features[1].weight = Matrix::identity(2);
  relu_net.head = AffineLayer(1, 2);
  const Matrix zr = forward_features(relu_net, column({5.0}), cache);
  CHECK(zr(0, 0) == 0.0);
  CHECK(zr(1, 0) == 0.0);

  CHECK_THROWS_AS(forward_features(relu_net, column({1.0, 2.0}), cache), InvalidInput);
}

TEST_CASE("forward_logits applies the head per column", "[network]") {
  AffineLayer head(2, 2);
  head.weight = Matrix::from_rows({{1.0, 0.0}, {0.0, 2.0}});
  head.bias = {1.0, 1.0};
  const Matrix o = forward_logits(head, column({3.0, 5.0}));
  CHECK(o(0, 0) == Catch::Approx(4.0));
  CHECK(o(1, 0) == Catch::Approx(11.0));

  // z = 0 -> logits are the bias for every column.
  Matrix zeros(2, 3);
  const Matrix ob = forward_logits(head, zeros);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(ob(0, j) == 1.0);
    CHECK(ob(1, j) == 1.0);
  }

  // W = I, b = 0 -> identity.
  AffineLayer id(2, 2);
  id.weight = Matrix::identity(2);
  const Matrix oi = forward_logits(id, column({-1.5, 2.5}));
  CHECK(oi(0, 0) == -1.5);
  CHECK(oi(1, 0) == 2.5);
}

TEST_CASE("backward on a single affine layer with sum loss", "[network]") {
  // loss = sum of outputs -> dW = 1 * x^T, db = 1.
  NetworkParams p;
  p.features.push_back(AffineLayer(2, 3));
  p.head = AffineLayer(1, 2);
  const Matrix x = column({1.0, -2.0, 0.5});
  ForwardCache cache;
  forward_features(p, x, cache);
  Matrix upstream(2, 1, 1.0);
  NetworkGrads g = zero_grads(p);
  features_backward(p, cache, upstream, g);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(g.features[0].weight(i, 0) == Catch::Approx(1.0));
    CHECK(g.features[0].weight(i, 1) == Catch::Approx(-2.0));
    CHECK(g.features[0].weight(i, 2) == Catch::Approx(0.5));
    CHECK(g.features[0].bias[i] == Catch::Approx(1.0));
  }

  // Zero upstream gradient -> zero parameter gradients.
  NetworkGrads gz = zero_grads(p);
  features_backward(p, cache, Matrix(2, 1), gz);
  for (double v : gz.features[0].weight.data) CHECK(v == 0.0);
}

TEST_CASE("backward rejects stale caches", "[network]") {
  NetworkParams p = init_params({3, 4, 2}, 2, 11);
  ForwardCache cache;
  forward_features(p, Matrix(3, 5), cache);
  NetworkGrads g = zero_grads(p);
  CHECK_THROWS_AS(features_backward(p, cache, Matrix(2, 4), g), InvalidState);
  CHECK_THROWS_AS(features_backward(p, ForwardCache{}, Matrix(2, 5), g), InvalidState);
}

TEST_CASE("analytic gradients match central finite differences", "[network]") {
  Rng rng(31);
  for (int instance = 0; instance < 5; ++instance) {
    NetworkParams p = init_params({4, 6, 3}, 3, 100 + static_cast<std::uint64_t>(instance));
    for (auto& l : p.features)
      for (double& v : l.weight.data) v = rng.normal(0.0, 0.1);
    Matrix x(4, 3);
    for (double& v : x.data) v = rng.normal();
    std::vector<int> y{0, 2, 1};

    auto loss_of = [&](NetworkParams& q) {
      ForwardCache c;
      const Matrix z = forward_features(q, x, c);
      const Matrix logits = forward_logits(q.head, z);
      return cross_entropy(logits, y).loss;
    };

    ForwardCache cache;
    const Matrix z = forward_features(p, x, cache);
    const Matrix logits = forward_logits(p.head, z);
    const LossAndGrad ce = cross_entropy(logits, y);
    NetworkGrads g = zero_grads(p);
    const Matrix dz = head_backward(p.head, z, ce.grad, g.head);
    features_backward(p, cache, dz, g);

    auto views = param_view(p);
    const auto flat = grad_flat(g);
    REQUIRE(views.size() == flat.size());
    const double h = 1e-5;
    for (int probe = 0; probe < 100; ++probe) {
      const std::size_t k = static_cast<std::size_t>(rng.below(views.size()));
      const double saved = *views[k];
      *views[k] = saved + h;
      const double lp = loss_of(p);
      *views[k] = saved - h;
      const double lm = loss_of(p);
      *views[k] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(flat[k]), 1e-6});
      CHECK(std::abs(fd - flat[k]) / denom < 1e-4);
    }
  }
}

TEST_CASE("relu stack is positively homogeneous on sign-stable inputs", "[network]") {
  NetworkParams p = init_params({3, 5, 4}, 2, 17);
  for (auto& l : p.features) l.bias.assign(l.bias.size(), 0.0);
  const Matrix x = column({0.4, -0.2, 0.9});
  ForwardCache cache;
  const Matrix z1 = forward_features(p, x, cache);
  const Matrix z2 = forward_features(p, scaled(x, 3.0), cache);
  for (std::size_t i = 0; i < z1.rows; ++i)
    CHECK(z2(i, 0) == Catch::Approx(3.0 * z1(i, 0)).margin(1e-12));
}

TEST_CASE("sgd and momentum kernels follow their recursions", "[network]") {
  // lr = 0 leaves parameters unchanged.
  double p = 1.0, g = 2.0;
  sgd_update(&p, &g, 1, 0.0);
  CHECK(p == 1.0);
  // p = 1, g = 2, lr = 0.1 -> 0.8.
  sgd_update(&p, &g, 1, 0.1);
  CHECK(p == Catch::Approx(0.8));

  // Quadratic loss 0.5 p^2, lr = 0.5: p halves each step.
  double q = 1.0;
  for (int i = 0; i < 6; ++i) {
    const double grad = q;
    sgd_update(&q, &grad, 1, 0.5);
  }
  CHECK(q == Catch::Approx(1.0 / 64.0));

  // Momentum: mu = 0.9, lr = 0.1, g = 1 from p = 0 -> -0.1 then -0.29.
  double v = 0.0, pm = 0.0;
  const double one = 1.0;
  momentum_update(&v, &pm, &one, 1, 0.1, 0.9);
  CHECK(pm == Catch::Approx(-0.1));
  momentum_update(&v, &pm, &one, 1, 0.1, 0.9);
  CHECK(pm == Catch::Approx(-0.29));

  // mu = 0 reduces to plain sgd; first step from zero velocity likewise.
  double v2 = 0.0, pa = 1.0, pb = 1.0;
  const double g2 = 2.0;
  momentum_update(&v2, &pa, &g2, 1, 0.1, 0.0);
  sgd_update(&pb, &g2, 1, 0.1);
  CHECK(pa == pb);
}

TEST_CASE("projector init shapes and determinism", "[network]") {
  const Projector lin = init_projector(ProjectorKind::Linear, 5, 42);
  CHECK(lin.a.rows == 5);
  CHECK(lin.a.cols == 6);
  const double limit = 1.0 / std::sqrt(6.0);
  for (double v : lin.a.data) CHECK(std::abs(v) <= limit);
  const Projector lin2 = init_projector(ProjectorKind::Linear, 5, 42);
  CHECK(lin.a.data == lin2.a.data);

  const Projector two = init_projector(ProjectorKind::TwoLayer, 4, 7);
  CHECK(two.w1.rows == 4);
  CHECK(two.w1.cols == 5);
  CHECK(two.w2.rows == 4);
  CHECK(two.w2.cols == 5);
}

TEST_CASE("checkpoint files round-trip bit-exactly", "[network]") {
  NetworkParams p = init_params({7, 5, 3}, 4, 123);
  const std::string path = "checkpoint_roundtrip.bin";
  save_checkpoint(path, p);
  const NetworkParams q = load_checkpoint(path);
  REQUIRE(q.features.size() == p.features.size());
  for (std::size_t l = 0; l < p.features.size(); ++l) {
    CHECK(q.features[l].weight.data == p.features[l].weight.data);
    CHECK(q.features[l].bias == p.features[l].bias);
  }
  CHECK(q.head.weight.data == p.head.weight.data);
  CHECK(q.head.bias == p.head.bias);
  std::remove(path.c_str());
}
