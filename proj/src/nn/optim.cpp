#include "fedthe/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fedthe::nn {

void sgd_step(Vector& params, std::span<const double> grads, double lr,
              double weight_decay) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * (grads[i] + weight_decay * params[i]);
  }
}

void sgd_step(Matrix& params, const Matrix& grads, double lr, double weight_decay) {
  if (!params.same_shape(grads)) {
    throw std::invalid_argument("sgd_step: matrix shape mismatch");
  }
  for (std::size_t i = 0; i < params.data.size(); ++i) {
    params.data[i] -= lr * (grads.data[i] + weight_decay * params.data[i]);
  }
}

void sgd_step(DenseLayer& layer, const DenseGrads& grads, double lr,
              double weight_decay) {
  sgd_step(layer.weights, grads.weights, lr, weight_decay);
  sgd_step(layer.bias, grads.bias, lr, weight_decay);
}

void sgd_step(Extractor& extractor, const ExtractorGrads& grads, double lr,
              double weight_decay) {
  if (extractor.layers.size() != grads.layers.size()) {
    throw std::invalid_argument("sgd_step: extractor layer count mismatch");
  }
  for (std::size_t i = 0; i < extractor.layers.size(); ++i) {
    sgd_step(extractor.layers[i], grads.layers[i], lr, weight_decay);
  }
}

void sgd_step(Head& head, const HeadGrads& grads, double lr, double weight_decay) {
  sgd_step(head.fc, grads.fc, lr, weight_decay);
}

void adam_step(Vector& params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace fedthe::nn
