// Test-only oracles, kept independent of the library's forward/backward and
// aggregation code paths.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "fedthe/nn/tensor.hpp"

namespace oracles {

using fedthe::nn::Matrix;
using fedthe::nn::Vector;

/// Brute-force affine transform written with index arithmetic only.
inline Vector affine_oracle(const Matrix& w, const Vector& b, const Vector& x) {
  Vector y(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    y[r] = b[r];
    for (std::size_t c = 0; c < w.cols; ++c) {
      y[r] += w.data[r * w.cols + c] * x[c];
    }
  }
  return y;
}

/// Central finite differences; returns worst relative error vs `analytic`.
inline double finite_difference_error(const std::function<double(const Vector&)>& f,
                                      const Vector& at, const Vector& analytic,
                                      double eps = 1e-4) {
  double worst = 0.0;
  Vector x = at;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

/// Weighted arithmetic mean, the aggregation oracle.
inline double weighted_mean(const std::vector<double>& values,
                            const std::vector<double>& weights) {
  double total_w = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += weights[i] * values[i];
    total_w += weights[i];
  }
  return acc / total_w;
}

/// Total-variation distance between two label histograms.
inline double tv_distance(const std::vector<std::int64_t>& a,
                          const std::vector<std::int64_t>& b) {
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]);
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    tv += std::abs(static_cast<double>(a[i]) / na - static_cast<double>(b[i]) / nb);
  }
  return 0.5 * tv;
}

/// Nearest-class-mean classifier, the generator sanity oracle.
inline int nearest_mean_label(const std::vector<Vector>& means,
                              std::span<const double> x) {
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < means.size(); ++c) {
    double dist = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - means[c][d];
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace oracles
