#include "fedthe/nn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace fedthe::nn {

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols) {
    throw std::invalid_argument("matvec: expected input of size " +
                                std::to_string(m.cols) + ", got " +
                                std::to_string(x.size()));
  }
  Vector y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) {
      acc += row[c] * x[c];
    }
    y[r] = acc;
  }
  return y;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.rows) {
    throw std::invalid_argument("matvec_transposed: expected input of size " +
                                std::to_string(m.rows) + ", got " +
                                std::to_string(x.size()));
  }
  Vector y(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < m.cols; ++c) {
      y[c] += row[c] * xr;
    }
  }
  return y;
}

void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b,
               double scale) {
  if (a.size() != m.rows || b.size() != m.cols) {
    throw std::invalid_argument("add_outer: shape mismatch");
  }
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = m.data.data() + r * m.cols;
    const double ar = scale * a[r];
    for (std::size_t c = 0; c < m.cols; ++c) {
      row[c] += ar * b[c];
    }
  }
}

void axpy(Vector& y, std::span<const double> x, double scale) {
  if (y.size() != x.size()) {
    throw std::invalid_argument("axpy: size mismatch");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += scale * x[i];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) {
    acc += x * x;
  }
  return std::sqrt(acc);
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("l2_distance: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

}  // namespace fedthe::nn
