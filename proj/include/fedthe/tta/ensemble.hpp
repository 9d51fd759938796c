#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "fedthe/nn/tensor.hpp"

namespace fedthe::tta {

using nn::Vector;

/// Head ensemble weight e parameterized as a softmax over two learnable
/// scalars, so e stays in (0, 1) under any number of optimization steps.
struct EnsembleState {
  double a_global = 0.0;
  double a_local = 0.0;

  double e() const { return 1.0 / (1.0 + std::exp(a_local - a_global)); }

  /// Chain rule through the two-scalar softmax: returns (dL/da_g, dL/da_l).
  std::pair<double, double> chain(double dloss_de) const {
    const double w = e();
    const double jac = w * (1.0 - w);
    return {dloss_de * jac, -dloss_de * jac};
  }
};

/// EMA of raw test features; unset until the first test sample arrives.
struct HistoryState {
  std::optional<Vector> feature;
};

enum class LossMode { Slw, EmOnly, FaOnly, FixedHalf };

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& name);

struct AdaptConfig {
  int e_steps = 20;
  double e_lr = 0.1;
  double alpha = 0.1;  // history EMA rate
  double beta = 0.1;   // test-feature smoothing
  LossMode loss_mode = LossMode::Slw;
  bool use_history = true;
  bool batch_wise = false;
  int batch_size = 32;
  bool ft_enabled = true;  // gates the fine-tuning phase of the plus variant
  int ft_steps = 3;
  double ft_lr = 5e-4;
  int ft_augments = 16;
  /// Diagnostic override: skip optimization and use this ensemble weight.
  std::optional<double> pin_e;

  void validate() const;
};

/// y = e * y_global + (1 - e) * y_local
Vector ensemble_logits(std::span<const double> global_logits,
                       std::span<const double> local_logits, double e);

/// Loss value with its gradient w.r.t. the two ensemble scalars.
struct ScalarLoss {
  double value = 0.0;
  double d_a_global = 0.0;
  double d_a_local = 0.0;
};

/// Shannon entropy of the ensembled prediction; heads are frozen, only the
/// ensemble scalars receive gradient.
ScalarLoss em_loss(std::span<const double> global_logits,
                   std::span<const double> local_logits, const EnsembleState& ens);

/// beta-smoothed test feature. An unset history is seeded with the raw
/// feature and the feature is returned unsmoothed (first-sample rule).
Vector smooth_feature(const Vector& feature, HistoryState& history, double beta);

/// Weighted distance of the smoothed test feature to the global and local
/// descriptors.
ScalarLoss fa_loss(std::span<const double> smoothed_feature,
                   std::span<const double> global_descriptor,
                   std::span<const double> local_descriptor, const EnsembleState& ens);

/// Cosine similarity of the two heads' softmax outputs, in [0, 1]. Treated as
/// a constant w.r.t. the ensemble weight.
double slw_lambda(std::span<const double> global_logits,
                  std::span<const double> local_logits);

/// The combined adaptation objective in the requested mode.
ScalarLoss the_loss(std::span<const double> global_logits,
                    std::span<const double> local_logits,
                    std::span<const double> smoothed_feature,
                    std::span<const double> global_descriptor,
                    std::span<const double> local_descriptor, const EnsembleState& ens,
                    LossMode mode);

/// history <- alpha * feature + (1 - alpha) * history, on the raw feature.
void update_history(HistoryState& history, const Vector& feature, double alpha);

}  // namespace fedthe::tta
