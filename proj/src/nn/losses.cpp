#include "fedthe/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedthe::nn {

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) {
    throw std::invalid_argument("softmax: empty logits");
  }
  const double max_z = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - max_z);
    total += p[i];
  }
  for (double& v : p) {
    v /= total;
  }
  return p;
}

LossGrad cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) +
                                " classes");
  }
  LossGrad out;
  out.dlogits = softmax(logits);
  // -log p_label computed from the shifted logits directly for accuracy.
  const double max_z = *std::max_element(logits.begin(), logits.end());
  double log_sum = 0.0;
  for (double z : logits) {
    log_sum += std::exp(z - max_z);
  }
  out.value = -(logits[label] - max_z - std::log(log_sum));
  out.dlogits[label] -= 1.0;
  return out;
}

LossGrad balanced_cross_entropy(std::span<const double> logits, int label,
                                std::span<const std::int64_t> class_counts) {
  if (class_counts.size() != logits.size()) {
    throw std::invalid_argument("balanced_cross_entropy: counts/logits size mismatch");
  }
  Vector adjusted(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (class_counts[i] <= 0) {
      throw std::invalid_argument("balanced_cross_entropy: class count must be positive");
    }
    adjusted[i] = logits[i] + std::log(static_cast<double>(class_counts[i]));
  }
  // The shift is constant in the logits, so the gradient passes through as-is.
  return cross_entropy(adjusted, label);
}

LossGrad shannon_entropy(std::span<const double> logits) {
  const Vector p = softmax(logits);
  double h = 0.0;
  for (double pi : p) {
    h -= pi * std::log(pi);
  }
  LossGrad out;
  out.value = h;
  out.dlogits.resize(p.size());
  // dH/dz_j = -p_j (log p_j + H)
  for (std::size_t j = 0; j < p.size(); ++j) {
    out.dlogits[j] = -p[j] * (std::log(p[j]) + h);
  }
  return out;
}

}  // namespace fedthe::nn
