#include "fedthe/tta/ensemble.hpp"

#include <algorithm>
#include <stdexcept>

#include "fedthe/nn/losses.hpp"

namespace fedthe::tta {

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::Slw: return "slw";
    case LossMode::EmOnly: return "em_only";
    case LossMode::FaOnly: return "fa_only";
    case LossMode::FixedHalf: return "fixed_half";
  }
  throw std::invalid_argument("to_string: unknown LossMode");
}

LossMode loss_mode_from_string(const std::string& name) {
  if (name == "slw") return LossMode::Slw;
  if (name == "em_only") return LossMode::EmOnly;
  if (name == "fa_only") return LossMode::FaOnly;
  if (name == "fixed_half") return LossMode::FixedHalf;
  throw std::invalid_argument("unknown loss mode: " + name);
}

void AdaptConfig::validate() const {
  if (e_steps < 1) {
    throw std::invalid_argument("AdaptConfig: e_steps must be >= 1");
  }
  if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("AdaptConfig: alpha and beta must be in [0, 1]");
  }
  if (batch_size < 1 || ft_steps < 0 || ft_augments < 1) {
    throw std::invalid_argument("AdaptConfig: bad batch/fine-tune settings");
  }
  if (pin_e && (*pin_e < 0.0 || *pin_e > 1.0)) {
    throw std::invalid_argument("AdaptConfig: pinned e must be in [0, 1]");
  }
}

Vector ensemble_logits(std::span<const double> global_logits,
                       std::span<const double> local_logits, double e) {
  if (global_logits.size() != local_logits.size()) {
    throw std::invalid_argument("ensemble_logits: dimension mismatch");
  }
  Vector out(global_logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = e * global_logits[i] + (1.0 - e) * local_logits[i];
  }
  return out;
}

ScalarLoss em_loss(std::span<const double> global_logits,
                   std::span<const double> local_logits, const EnsembleState& ens) {
  const double e = ens.e();
  const Vector mixed = ensemble_logits(global_logits, local_logits, e);
  const nn::LossGrad entropy = nn::shannon_entropy(mixed);
  double dloss_de = 0.0;
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    dloss_de += entropy.dlogits[i] * (global_logits[i] - local_logits[i]);
  }
  ScalarLoss out;
  out.value = entropy.value;
  std::tie(out.d_a_global, out.d_a_local) = ens.chain(dloss_de);
  return out;
}

Vector smooth_feature(const Vector& feature, HistoryState& history, double beta) {
  if (!history.feature) {
    history.feature = feature;
    return feature;
  }
  if (history.feature->size() != feature.size()) {
    throw std::invalid_argument("smooth_feature: dimension mismatch");
  }
  Vector out(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    out[i] = beta * feature[i] + (1.0 - beta) * (*history.feature)[i];
  }
  return out;
}

ScalarLoss fa_loss(std::span<const double> smoothed_feature,
                   std::span<const double> global_descriptor,
                   std::span<const double> local_descriptor, const EnsembleState& ens) {
  const double dist_global = nn::l2_distance(smoothed_feature, global_descriptor);
  const double dist_local = nn::l2_distance(smoothed_feature, local_descriptor);
  const double e = ens.e();
  ScalarLoss out;
  out.value = e * dist_global + (1.0 - e) * dist_local;
  std::tie(out.d_a_global, out.d_a_local) = ens.chain(dist_global - dist_local);
  return out;
}

double slw_lambda(std::span<const double> global_logits,
                  std::span<const double> local_logits) {
  const Vector pg = nn::softmax(global_logits);
  const Vector pl = nn::softmax(local_logits);
  const double cosine = nn::dot(pg, pl) / (nn::l2_norm(pg) * nn::l2_norm(pl));
  return std::clamp(cosine, 0.0, 1.0);
}

ScalarLoss the_loss(std::span<const double> global_logits,
                    std::span<const double> local_logits,
                    std::span<const double> smoothed_feature,
                    std::span<const double> global_descriptor,
                    std::span<const double> local_descriptor, const EnsembleState& ens,
                    LossMode mode) {
  switch (mode) {
    case LossMode::EmOnly:
      return em_loss(global_logits, local_logits, ens);
    case LossMode::FaOnly:
      return fa_loss(smoothed_feature, global_descriptor, local_descriptor, ens);
    case LossMode::Slw:
    case LossMode::FixedHalf: {
      const double lambda = mode == LossMode::FixedHalf
                                ? 0.5
                                : slw_lambda(global_logits, local_logits);
      const ScalarLoss em = em_loss(global_logits, local_logits, ens);
      const ScalarLoss fa =
          fa_loss(smoothed_feature, global_descriptor, local_descriptor, ens);
      ScalarLoss out;
      out.value = lambda * em.value + (1.0 - lambda) * fa.value;
      out.d_a_global = lambda * em.d_a_global + (1.0 - lambda) * fa.d_a_global;
      out.d_a_local = lambda * em.d_a_local + (1.0 - lambda) * fa.d_a_local;
      return out;
    }
  }
  throw std::invalid_argument("the_loss: unknown mode");
}

void update_history(HistoryState& history, const Vector& feature, double alpha) {
  if (!history.feature) {
    history.feature = feature;
    return;
  }
  if (history.feature->size() != feature.size()) {
    throw std::invalid_argument("update_history: dimension mismatch");
  }
  Vector& h = *history.feature;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    h[i] = alpha * feature[i] + (1.0 - alpha) * h[i];
  }
}

}  // namespace fedthe::tta
