#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cflab {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// a * b, plain row-by-column dot products accumulated in index order.
/// Shape mismatch throws std::invalid_argument.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
void scale(Matrix& m, double s);

/// c = alpha * op(a) * op(b) + beta * c, BLAS-backed; the accumulation order
/// is implementation-defined, so results differ from matmul() in the last
/// ulps. Used on the training hot path.
void gemm(bool trans_a, bool trans_b, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);
std::vector<double> elementwise_square(std::span<const double> v);

}  // namespace cflab
