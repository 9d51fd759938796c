#pragma once

#include <cstdint>

#include "fedthe/nn/model.hpp"
#include "fedthe/nn/tensor.hpp"

namespace fedthe::nn {

/// p <- p - lr * (g + weight_decay * p)
void sgd_step(Vector& params, std::span<const double> grads, double lr,
              double weight_decay = 0.0);
void sgd_step(Matrix& params, const Matrix& grads, double lr,
              double weight_decay = 0.0);
void sgd_step(DenseLayer& layer, const DenseGrads& grads, double lr,
              double weight_decay = 0.0);
void sgd_step(Extractor& extractor, const ExtractorGrads& grads, double lr,
              double weight_decay = 0.0);
void sgd_step(Head& head, const HeadGrads& grads, double lr,
              double weight_decay = 0.0);

/// Bias-corrected Adam over a flat parameter vector. Moments are zero at
/// construction; step_count increments by one per update.
struct AdamState {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Vector first_moment;
  Vector second_moment;
  std::int64_t step_count = 0;

  explicit AdamState(std::size_t size, double learning_rate = 0.1)
      : lr(learning_rate), first_moment(size, 0.0), second_moment(size, 0.0) {}
};

void adam_step(Vector& params, std::span<const double> grads, AdamState& state);

}  // namespace fedthe::nn
