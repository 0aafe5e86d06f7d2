#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lelp {

// Dense row-major double-precision matrix. The substrate of every kernel in
// this library; kept deliberately minimal (no views, no expression templates).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool empty() const { return rows == 0 || cols == 0; }

  static Matrix identity(std::size_t n);
};

using Vector = std::vector<double>;

bool operator==(const Matrix& a, const Matrix& b);

// c = a b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = aᵀ b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// c = a bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

Vector matvec(const Matrix& a, std::span<const double> x);
// aᵀ x
Vector matvec_t(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Column mean of a (one entry per column).
Vector column_mean(const Matrix& a);

// True when every entry is finite.
bool all_finite(const Matrix& a);
bool all_finite(std::span<const double> a);

// max_ij |a_ij - b_ij|; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

// New matrix from the listed rows, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

}  // namespace lelp
