#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/matrix.hpp"

namespace bfp {

/// Thin SVD Z = U diag(S) V^T with r = min(rows, cols).
/// U is rows x r with orthonormal columns, V is cols x r, S non-increasing.
struct SvdResult {
  Matrix U;
  std::vector<double> S;
  Matrix V;
};

namespace detail {

// One-sided Jacobi on a tall matrix (rows >= cols): orthogonalize the
// columns of W by plane rotations, accumulating them in V. On exit
// W = U * diag(S) and V holds the right singular vectors.
inline void jacobi_orthogonalize(Matrix& w, Matrix& v, int max_sweeps) {
  const std::size_t n = w.cols;
  const double tol = 1e-14;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < w.rows; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < w.rows; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw NumericalError("svd_thin: Jacobi sweeps did not converge", max_sweeps);
}

// Replace (near-)null columns of U with vectors orthonormal to all others,
// drawn from the standard basis by modified Gram-Schmidt.
inline void complete_basis(Matrix& u, const std::vector<bool>& degenerate) {
  const std::size_t d = u.rows, r = u.cols;
  std::size_t probe = 0;
  for (std::size_t j = 0; j < r; ++j) {
    if (!degenerate[j]) continue;
    for (; probe <= d; ++probe) {
      if (probe == d)
        throw NumericalError("svd_thin: basis completion exhausted", static_cast<int>(d));
      std::vector<double> e(d, 0.0);
      e[probe] = 1.0;
      for (std::size_t k = 0; k < r; ++k) {
        if (degenerate[k] && k >= j) continue;  // not yet filled
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += e[i] * u(i, k);
        for (std::size_t i = 0; i < d; ++i) e[i] -= dot * u(i, k);
      }
      double nrm = 0.0;
      for (double x : e) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 1e-8) {
        for (std::size_t i = 0; i < d; ++i) u(i, j) = e[i] / nrm;
        ++probe;
        break;
      }
    }
  }
}

inline SvdResult svd_tall(const Matrix& z, int max_sweeps) {
  Matrix w = z;
  Matrix v = Matrix::identity(z.cols);
  jacobi_orthogonalize(w, v, max_sweeps);

  const std::size_t r = z.cols;
  std::vector<double> sigma(r);
  for (std::size_t j = 0; j < r; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  SvdResult out;
  out.U = Matrix(z.rows, r);
  out.V = Matrix(z.cols, r);
  out.S.resize(r);
  const double smax = sigma.empty() ? 0.0 : sigma[order[0]];
  const double cutoff = smax * 1e-13;
  std::vector<bool> degenerate(r, false);
  for (std::size_t jj = 0; jj < r; ++jj) {
    const std::size_t j = order[jj];
    out.S[jj] = sigma[j];
    if (sigma[j] > cutoff && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < z.rows; ++i) out.U(i, jj) = w(i, j) / sigma[j];
    } else {
      degenerate[jj] = true;
    }
    for (std::size_t i = 0; i < z.cols; ++i) out.V(i, jj) = v(i, j);
  }
  complete_basis(out.U, degenerate);
  return out;
}

}  // namespace detail

/// Rank-r thin SVD with singular values sorted descending. Throws
/// InvalidInput for non-finite input and NumericalError (with the sweep
/// count) if the Jacobi iteration fails to converge.
inline SvdResult svd_thin(const Matrix& z, int max_sweeps = 64) {
  if (z.rows == 0 || z.cols == 0) throw InvalidInput("svd_thin: empty matrix");
  z.require_finite("svd_thin input");
  if (z.rows >= z.cols) return detail::svd_tall(z, max_sweeps);
  SvdResult t = detail::svd_tall(transpose(z), max_sweeps);
  return SvdResult{std::move(t.V), std::move(t.S), std::move(t.U)};
}

/// Reconstruct U diag(S) V^T (test and analysis helper).
inline Matrix svd_reconstruct(const SvdResult& r) {
  Matrix us = r.U;
  for (std::size_t i = 0; i < us.rows; ++i)
    for (std::size_t j = 0; j < us.cols; ++j) us(i, j) *= r.S[j];
  return matmul_a_bt(us, r.V);
}

/// Least-squares solve X = argmin ||A X - B||_F via the SVD pseudo-inverse.
/// Singular values below rcond * s_max are treated as zero.
inline Matrix svd_solve(const Matrix& a, const Matrix& b, double rcond = 1e-12) {
  if (a.rows != b.rows) throw InvalidInput("svd_solve: row counts differ");
  SvdResult dec = svd_thin(a);
  const double cut = dec.S.empty() ? 0.0 : dec.S[0] * rcond;
  Matrix utb = matmul_at_b(dec.U, b);  // r x k
  for (std::size_t i = 0; i < utb.rows; ++i) {
    const double s = dec.S[i];
    const double inv = s > cut ? 1.0 / s : 0.0;
    for (std::size_t j = 0; j < utb.cols; ++j) utb(i, j) *= inv;
  }
  return matmul(dec.V, utb);
}

}  // namespace bfp
