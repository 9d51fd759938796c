#pragma once

#include <cstdint>
#include <span>

#include "fedthe/nn/tensor.hpp"

namespace fedthe::nn {

/// Max-shifted softmax; output is strictly positive and sums to 1.
Vector softmax(std::span<const double> logits);

/// Scalar loss with its gradient w.r.t. the input logits.
struct LossGrad {
  double value = 0.0;
  Vector dlogits;
};

/// -log p_label, gradient p - onehot(label).
LossGrad cross_entropy(std::span<const double> logits, int label);

/// Cross-entropy on logits shifted by log(class count), countering label
/// imbalance. All counts must be positive.
LossGrad balanced_cross_entropy(std::span<const double> logits, int label,
                                std::span<const std::int64_t> class_counts);

/// Shannon entropy of softmax(logits), natural log; in [0, log C].
LossGrad shannon_entropy(std::span<const double> logits);

}  // namespace fedthe::nn
