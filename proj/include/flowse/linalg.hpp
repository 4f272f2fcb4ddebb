#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace flowse {

// Dense row-major matrix sized for the oracle's block systems (a few hundred
// rows at most). Not a general linear algebra library.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (a.cols != x.size()) throw std::invalid_argument("matvec: shape mismatch");
  std::vector<double> out(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) acc += a(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("cholesky: matrix must be square");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(acc > 0.0))
          throw std::invalid_argument("cholesky: matrix is not positive definite");
        l(i, i) = std::sqrt(acc);
      } else {
        l(i, j) = acc / l(j, j);
      }
    }
  }
  return l;
}

/// Solves a x = rhs for symmetric positive-definite a via Cholesky.
inline std::vector<double> solve_spd(const Matrix& a, const std::vector<double>& rhs) {
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows;
  if (rhs.size() != n) throw std::invalid_argument("solve_spd: shape mismatch");
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = rhs[i];
    for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * z[k];
    z[i] = acc / l(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = z[ii];
    for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * x[k];
    x[ii] = acc / l(ii, ii);
  }
  return x;
}

/// Columns of the solution of a X = B.
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (b.rows != a.rows) throw std::invalid_argument("solve_spd: shape mismatch");
  Matrix out(b.rows, b.cols);
  for (std::size_t j = 0; j < b.cols; ++j) {
    std::vector<double> col(b.rows);
    for (std::size_t i = 0; i < b.rows; ++i) col[i] = b(i, j);
    const std::vector<double> x = solve_spd(a, col);
    for (std::size_t i = 0; i < b.rows; ++i) out(i, j) = x[i];
  }
  return out;
}

}  // namespace flowse
