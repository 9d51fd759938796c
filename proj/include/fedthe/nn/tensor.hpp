#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedthe::nn {

using Vector = std::vector<double>;

/// Dense row-major matrix. Rows index outputs, columns index inputs.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// y = M x
Vector matvec(const Matrix& m, std::span<const double> x);
/// y = M^T x
Vector matvec_transposed(const Matrix& m, std::span<const double> x);
/// M += scale * a b^T
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b,
               double scale = 1.0);
/// y += scale * x
void axpy(Vector& y, std::span<const double> x, double scale = 1.0);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
/// ||a - b||_2
double l2_distance(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);

}  // namespace fedthe::nn
