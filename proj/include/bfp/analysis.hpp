#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/losses.hpp"
#include "bfp/matrix.hpp"
#include "bfp/network.hpp"
#include "bfp/svd.hpp"

namespace bfp {

/// Principal directions of a feature matrix (columns are examples).
/// Uncentered by default, matching the projection U_{1:k} U^T_{1:k} z with
/// no mean re-addition; pass center=true to remove feature means first.
inline SvdResult pca(const Matrix& z, bool center = false) {
  if (!center) return svd_thin(z);
  Matrix zc = z;
  for (std::size_t i = 0; i < zc.rows; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < zc.cols; ++j) m += zc(i, j);
    m /= static_cast<double>(zc.cols);
    for (std::size_t j = 0; j < zc.cols; ++j) zc(i, j) -= m;
  }
  return svd_thin(zc);
}

/// Classify features projected onto the span of the top-k principal
/// directions with an existing head; returns accuracy. Class-IL argmax,
/// ties to the lowest class index.
inline double proj_acc(const Matrix& u, std::size_t k, const AffineLayer& head,
                       const Matrix& z_eval, const std::vector<int>& labels) {
  if (k < 1 || k > u.cols) throw InvalidInput("proj_acc: k outside [1, rank]");
  if (u.rows != z_eval.rows) throw InvalidInput("proj_acc: basis/feature dim mismatch");
  Matrix uk(u.rows, k);
  for (std::size_t i = 0; i < u.rows; ++i)
    for (std::size_t j = 0; j < k; ++j) uk(i, j) = u(i, j);
  Matrix coords = matmul_at_b(uk, z_eval);
  Matrix zp = matmul(uk, coords);
  Matrix logits = forward_logits(head, zp);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < logits.cols; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.rows; ++i)
      if (logits(i, j) > logits(best, j)) best = i;
    if (static_cast<int>(best) == labels[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.cols);
}

/// Singular spectrum of a feature matrix plus the projected-accuracy curve,
/// with relative variants normalized by each curve's maximum.
struct SpectrumReport {
  std::vector<double> singular_values;
  std::vector<double> proj_acc;  // index k-1 holds proj-acc(k)
  std::vector<double> rel_singular_values;
  std::vector<double> rel_proj_acc;
};

inline SpectrumReport spectrum_report(const Matrix& z_basis, const AffineLayer& head,
                                      const Matrix& z_eval, const std::vector<int>& labels,
                                      bool center = false) {
  SvdResult dec = pca(z_basis, center);
  SpectrumReport rep;
  rep.singular_values = dec.S;
  const std::size_t r = dec.S.size();
  rep.proj_acc.resize(r);
  // Incremental reconstruction: adding direction k extends the projection.
  Matrix coords = matmul_at_b(dec.U, z_eval);  // r x n
  Matrix zp(z_eval.rows, z_eval.cols);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t i = 0; i < zp.rows; ++i) {
      const double uik = dec.U(i, k);
      if (uik == 0.0) continue;
      for (std::size_t j = 0; j < zp.cols; ++j) zp(i, j) += uik * coords(k, j);
    }
    Matrix logits = forward_logits(head, zp);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < logits.rows; ++i)
        if (logits(i, j) > logits(best, j)) best = i;
      if (static_cast<int>(best) == labels[j]) ++correct;
    }
    rep.proj_acc[k] = static_cast<double>(correct) / static_cast<double>(logits.cols);
  }
  auto normalized = [](const std::vector<double>& xs) {
    double mx = 0.0;
    for (double x : xs) mx = std::max(mx, x);
    std::vector<double> out(xs.size(), 0.0);
    if (mx > 0.0)
      for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] / mx;
    return out;
  };
  rep.rel_singular_values = normalized(rep.singular_values);
  rep.rel_proj_acc = normalized(rep.proj_acc);
  return rep;
}

/// Smallest k whose relative projected accuracy reaches the threshold.
inline std::size_t saturation_k(const SpectrumReport& rep, double threshold = 0.95) {
  for (std::size_t k = 0; k < rep.rel_proj_acc.size(); ++k)
    if (rep.rel_proj_acc[k] >= threshold) return k + 1;
  return rep.rel_proj_acc.size();
}

/// Linear centered kernel alignment between two representations of the same
/// examples: ||Z1c Z2c^T||_F^2 / (||Z1c Z1c^T||_F ||Z2c Z2c^T||_F).
/// Returns 0 when a centered operand is all zero.
inline double cka(const Matrix& z1, const Matrix& z2) {
  if (z1.cols != z2.cols) throw InvalidInput("cka: column counts differ");
  auto centered = [](const Matrix& z) {
    Matrix c = z;
    for (std::size_t i = 0; i < c.rows; ++i) {
      double m = 0.0;
      for (std::size_t j = 0; j < c.cols; ++j) m += c(i, j);
      m /= static_cast<double>(c.cols);
      for (std::size_t j = 0; j < c.cols; ++j) c(i, j) -= m;
    }
    return c;
  };
  const Matrix a = centered(z1);
  const Matrix b = centered(z2);
  const double cross = frobenius_norm(matmul_a_bt(a, b));
  const double na = frobenius_norm(matmul_a_bt(a, a));
  const double nb = frobenius_norm(matmul_a_bt(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return (cross * cross) / (na * nb);
}

/// CKA of a data block under two extractors: how much the representation of
/// already-learned (seen) and not-yet-learned (unseen) data moved while
/// training one task.
inline std::pair<double, double> cka_seen_unseen(const NetworkParams& h_prev,
                                                 const NetworkParams& h_curr,
                                                 const Matrix& seen_inputs,
                                                 const Matrix& unseen_inputs) {
  if (seen_inputs.cols == 0 || unseen_inputs.cols == 0)
    throw InvalidInput("cka_seen_unseen: empty data block");
  if (h_prev.feature_dim() != h_curr.feature_dim())
    throw InvalidInput("cka_seen_unseen: feature dimensions differ");
  const double seen = cka(features_only(h_prev, seen_inputs),
                          features_only(h_curr, seen_inputs));
  const double unseen = cka(features_only(h_prev, unseen_inputs),
                            features_only(h_curr, unseen_inputs));
  return {seen, unseen};
}

struct CkaPoint {
  int task = 0;  // 1-based; defined for task >= 2
  double seen = 0.0;
  double unseen = 0.0;
};

// ---- linear probing ----

namespace detail {

struct LogisticFit {
  Matrix w;  // c x d
  std::vector<double> b;
  int iterations = 0;
};

// Multinomial logistic regression by full-batch gradient descent with a
// fixed ridge on the weights. Step size 1/L from the softmax curvature
// bound L = sigma_max(X)^2 / (2n) + ridge; halved if a step overshoots.
inline LogisticFit fit_logistic(const Matrix& x, const std::vector<int>& y,
                                std::size_t classes, double ridge = 1e-4,
                                double grad_tol = 1e-5, int max_iters = 2000) {
  const std::size_t d = x.rows, n = x.cols;
  LogisticFit fit;
  fit.w = Matrix(classes, d);
  fit.b.assign(classes, 0.0);

  const double smax = svd_thin(x).S.front();
  const double lipschitz = smax * smax / (2.0 * static_cast<double>(n)) + ridge + 1e-12;
  double lr = 1.0 / lipschitz;

  auto eval = [&](const Matrix& w, const std::vector<double>& b, Matrix* gw,
                  std::vector<double>* gb) {
    Matrix logits = matmul(w, x);
    for (std::size_t i = 0; i < classes; ++i)
      for (std::size_t j = 0; j < n; ++j) logits(i, j) += b[i];
    LossAndGrad ce = cross_entropy(logits, y);
    double loss = ce.loss;
    for (double v : w.data) loss += 0.5 * ridge * v * v;
    if (gw) {
      *gw = matmul_a_bt(ce.grad, x);
      for (std::size_t k = 0; k < gw->data.size(); ++k)
        gw->data[k] += ridge * w.data[k];
      gb->assign(classes, 0.0);
      for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gb)[i] += ce.grad(i, j);
    }
    return loss;
  };

  Matrix gw;
  std::vector<double> gb;
  double loss = eval(fit.w, fit.b, &gw, &gb);
  for (int it = 0; it < max_iters; ++it) {
    fit.iterations = it + 1;
    double gnorm2 = 0.0;
    for (double v : gw.data) gnorm2 += v * v;
    for (double v : gb) gnorm2 += v * v;
    if (std::sqrt(gnorm2) < grad_tol) break;
    Matrix w_next = fit.w;
    std::vector<double> b_next = fit.b;
    for (std::size_t k = 0; k < w_next.data.size(); ++k) w_next.data[k] -= lr * gw.data[k];
    for (std::size_t k = 0; k < b_next.size(); ++k) b_next[k] -= lr * gb[k];
    Matrix gw_next;
    std::vector<double> gb_next;
    const double loss_next = eval(w_next, b_next, &gw_next, &gb_next);
    if (loss_next > loss) {
      lr *= 0.5;  // curvature bound was too optimistic for this region
      continue;
    }
    fit.w = std::move(w_next);
    fit.b = std::move(b_next);
    gw = std::move(gw_next);
    gb = std::move(gb_next);
    loss = loss_next;
  }
  return fit;
}

}  // namespace detail

/// Fit a fresh linear classifier on frozen features and report test
/// accuracy. `fraction` keeps the leading share of each training class
/// (at least one example; a class that ends up absent raises InvalidInput
/// naming it).
inline double linear_probe(const Matrix& train_features, const std::vector<int>& train_labels,
                           const Matrix& test_features, const std::vector<int>& test_labels,
                           double fraction = 1.0) {
  if (train_labels.empty() || test_labels.empty())
    throw InvalidInput("linear_probe: empty split");
  int classes = 0;
  for (int y : train_labels) classes = std::max(classes, y + 1);
  for (int y : test_labels) classes = std::max(classes, y + 1);

  std::vector<std::size_t> keep;
  if (fraction >= 1.0) {
    keep.resize(train_labels.size());
    for (std::size_t j = 0; j < keep.size(); ++j) keep[j] = j;
  } else {
    std::vector<std::size_t> total(static_cast<std::size_t>(classes), 0);
    for (int y : train_labels) ++total[static_cast<std::size_t>(y)];
    std::vector<std::size_t> quota(static_cast<std::size_t>(classes), 0);
    for (int c = 0; c < classes; ++c)
      quota[static_cast<std::size_t>(c)] = static_cast<std::size_t>(
          std::ceil(fraction * static_cast<double>(total[static_cast<std::size_t>(c)])));
    std::vector<std::size_t> taken(static_cast<std::size_t>(classes), 0);
    for (std::size_t j = 0; j < train_labels.size(); ++j) {
      const auto c = static_cast<std::size_t>(train_labels[j]);
      if (taken[c] < quota[c]) {
        keep.push_back(j);
        ++taken[c];
      }
    }
  }
  std::vector<bool> present(static_cast<std::size_t>(classes), false);
  for (std::size_t j : keep) present[static_cast<std::size_t>(train_labels[j])] = true;
  for (int y : test_labels)
    if (!present[static_cast<std::size_t>(y)])
      throw InvalidInput("linear_probe: class " + std::to_string(y) +
                         " missing from the training portion");

  Matrix x(train_features.rows, keep.size());
  std::vector<int> y(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    for (std::size_t i = 0; i < x.rows; ++i) x(i, j) = train_features(i, keep[j]);
    y[j] = train_labels[keep[j]];
  }

  detail::LogisticFit fit =
      detail::fit_logistic(x, y, static_cast<std::size_t>(classes));
  Matrix logits = matmul(fit.w, test_features);
  for (std::size_t i = 0; i < logits.rows; ++i)
    for (std::size_t j = 0; j < logits.cols; ++j) logits(i, j) += fit.b[i];
  std::size_t correct = 0;
  for (std::size_t j = 0; j < logits.cols; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.rows; ++i)
      if (logits(i, j) > logits(best, j)) best = i;
    if (static_cast<int>(best) == test_labels[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_labels.size());
}

// ---- empirical separability transport ----

struct PairSeparability {
  int class_a = 0;
  int class_b = 0;
  std::vector<double> direction;  // unit vector in the old feature space
  double threshold = 0.0;
  std::size_t violations_old = 0;
  std::size_t violations_new = 0;
  bool separable_old = true;  // false: pair skipped, counts not meaningful
};

struct SeparabilityReport {
  std::vector<PairSeparability> pairs;
};

/// For every class pair: find a separating (w, b) in the old feature space
/// via a pairwise logistic fit (threshold at the midpoint of the projected
/// extremes), then count violations of the transported inequality
/// (A^T w)^T zhat vs b in the new space. a_proj is the d x (d+1) projector
/// matrix mapping [z_new; 1] to the old space.
inline SeparabilityReport separability_check(const Matrix& z_old, const Matrix& z_new,
                                             const std::vector<int>& labels,
                                             const Matrix& a_proj) {
  if (z_old.cols != z_new.cols || z_old.cols != labels.size())
    throw InvalidInput("separability_check: column counts differ");
  const std::size_t d = z_old.rows;
  if (a_proj.rows != d || a_proj.cols != d + 1)
    throw InvalidInput("separability_check: projector must be d x (d+1)");

  int classes = 0;
  for (int y : labels) classes = std::max(classes, y + 1);

  SeparabilityReport report;
  for (int ca = 0; ca < classes; ++ca) {
    for (int cb = ca + 1; cb < classes; ++cb) {
      std::vector<std::size_t> idx;
      std::vector<int> pair_y;
      for (std::size_t j = 0; j < labels.size(); ++j)
        if (labels[j] == ca || labels[j] == cb) {
          idx.push_back(j);
          pair_y.push_back(labels[j] == ca ? 0 : 1);
        }
      const auto count_a = static_cast<std::size_t>(
          std::count(pair_y.begin(), pair_y.end(), 0));
      if (count_a == 0 || count_a == pair_y.size()) continue;  // one-sided pair

      Matrix x(d, idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j)
        for (std::size_t i = 0; i < d; ++i) x(i, j) = z_old(i, idx[j]);

      detail::LogisticFit fit = detail::fit_logistic(x, pair_y, 2, 1e-6, 1e-7, 4000);
      PairSeparability pair;
      pair.class_a = ca;
      pair.class_b = cb;
      // Direction along which class_a scores higher.
      std::vector<double> w(d);
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        w[i] = fit.w(0, i) - fit.w(1, i);
        norm += w[i] * w[i];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) {
        pair.separable_old = false;
        report.pairs.push_back(std::move(pair));
        continue;
      }
      for (double& v : w) v /= norm;
      pair.direction = w;

      double min_a = 0.0, max_b = 0.0;
      bool first_a = true, first_b = true;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += w[i] * x(i, j);
        if (pair_y[j] == 0) {
          min_a = first_a ? proj : std::min(min_a, proj);
          first_a = false;
        } else {
          max_b = first_b ? proj : std::max(max_b, proj);
          first_b = false;
        }
      }
      pair.threshold = 0.5 * (min_a + max_b);
      pair.separable_old = min_a > max_b;

      auto count_violations = [&](const Matrix& z, const std::vector<double>& dir,
                                  double thr) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
          double proj = 0.0;
          for (std::size_t i = 0; i < d; ++i) proj += dir[i] * z(i, idx[j]);
          const bool ok = pair_y[j] == 0 ? proj > thr : proj < thr;
          if (!ok) ++count;
        }
        return count;
      };
      pair.violations_old = count_violations(z_old, w, pair.threshold);

      // Transported direction: (A^T w) with the bias column folded into the
      // threshold: w^T A [z;1] = (A_z^T w)^T z + w^T a_bias.
      std::vector<double> w_new(d, 0.0);
      double bias_shift = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t r = 0; r < d; ++r) w_new[i] += a_proj(r, i) * w[r];
        bias_shift += w[i] * a_proj(i, d);
      }
      pair.violations_new = count_violations(z_new, w_new, pair.threshold - bias_shift);
      report.pairs.push_back(std::move(pair));
    }
  }
  return report;
}

/// Least-squares linear projector mapping [z_new; 1] onto z_old:
/// A = argmin ||A Zhat - Z_old||_F, solved via the SVD pseudo-inverse.
inline Matrix fit_projector_least_squares(const Matrix& z_new, const Matrix& z_old) {
  if (z_new.cols != z_old.cols)
    throw InvalidInput("fit_projector_least_squares: column counts differ");
  Matrix zhat(z_new.rows + 1, z_new.cols);
  for (std::size_t i = 0; i < z_new.rows; ++i)
    for (std::size_t j = 0; j < z_new.cols; ++j) zhat(i, j) = z_new(i, j);
  for (std::size_t j = 0; j < z_new.cols; ++j) zhat(z_new.rows, j) = 1.0;
  // A Zhat = Z_old  <=>  Zhat^T A^T = Z_old^T.
  Matrix at = svd_solve(transpose(zhat), transpose(z_old));
  return transpose(at);
}

}  // namespace bfp
