#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "bfp/error.hpp"

namespace bfp {

/// Dense real matrix, row-major, 64-bit entries. Examples live in columns:
/// a feature matrix Z is d x n for n examples of dimension d.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Matrix m(rs.size(), rs.begin()->size());
    std::size_t i = 0;
    for (const auto& r : rs) {
      if (r.size() != m.cols) throw InvalidInput("from_rows: ragged rows");
      std::size_t j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }

  std::vector<double> col(std::size_t j) const {
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = (*this)(i, j);
    return out;
  }

  void set_col(std::size_t j, const std::vector<double>& v) {
    for (std::size_t i = 0; i < rows; ++i) (*this)(i, j) = v[i];
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void require_finite(const std::string& name) const {
    if (!all_finite()) throw InvalidInput(name + ": non-finite entries");
  }
};

inline bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

/// C = A * B. Loop order keeps the inner accesses sequential.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw InvalidInput("matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[i * a.cols];
    double* crow = &c.data[i * b.cols];
    for (std::size_t l = 0; l < a.cols; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = &b.data[l * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// C = A^T * B without materializing the transpose.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw InvalidInput("matmul_at_b: row counts differ");
  Matrix c(a.cols, b.cols);
  for (std::size_t l = 0; l < a.rows; ++l) {
    const double* arow = &a.data[l * a.cols];
    const double* brow = &b.data[l * b.cols];
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = &c.data[i * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// C = A * B^T without materializing the transpose.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw InvalidInput("matmul_a_bt: column counts differ");
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[i * a.cols];
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[j * b.cols];
      double s = 0.0;
      for (std::size_t l = 0; l < a.cols; ++l) s += arow[l] * brow[l];
      c(i, j) = s;
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) throw InvalidInput("matrix subtraction: shape mismatch");
  Matrix c = a;
  for (std::size_t k = 0; k < c.data.size(); ++k) c.data[k] -= b.data[k];
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) throw InvalidInput("matrix addition: shape mismatch");
  Matrix c = a;
  for (std::size_t k = 0; k < c.data.size(); ++k) c.data[k] += b.data[k];
  return c;
}

inline Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

/// sqrt of the sum of squared entries.
inline double frobenius_norm(const Matrix& z) {
  z.require_finite("frobenius_norm input");
  double s = 0.0;
  for (double v : z.data) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace bfp
