#pragma once

#include <span>
#include <vector>

#include "fedthe/nn/model.hpp"
#include "fedthe/nn/rng.hpp"
#include "fedthe/tta/ensemble.hpp"

namespace fedthe::tta {

using nn::Extractor;
using nn::Head;
using nn::RngStream;
using nn::TwoHeadModel;

/// Optimizes the ensemble scalars from their (0, 0) reset with Adam for
/// config.e_steps steps on the_loss; model parameters are never touched.
double optimize_e(std::span<const double> global_logits,
                  std::span<const double> local_logits,
                  std::span<const double> smoothed_feature,
                  std::span<const double> global_descriptor,
                  std::span<const double> local_descriptor, const AdaptConfig& config);

/// Batch-wise variant: one ensemble weight for the whole batch, minimizing
/// the mean of the per-sample objectives.
double optimize_e_batch(const std::vector<Vector>& global_logits,
                        const std::vector<Vector>& local_logits,
                        const std::vector<Vector>& smoothed_features,
                        std::span<const double> global_descriptor,
                        std::span<const double> local_descriptor,
                        const AdaptConfig& config);

/// Stochastic input transforms for marginal-entropy fine-tuning. The family
/// is {identity, additive jitter, scale, dropout}; identity always included.
struct AugmentationSpec {
  double sigma_data = 1.0;
};

constexpr int kNumAugmentKinds = 4;
Vector apply_augment(const AugmentationSpec& spec, int kind, std::span<const double> x,
                     RngStream& rng);
/// Uniform draw from the family.
Vector augment(const AugmentationSpec& spec, std::span<const double> x, RngStream& rng);

/// Marginal-entropy objective for a fixed set of augmented views of one
/// input: mean of the per-view softmax probabilities of the e-ensembled
/// two-head model, followed by Shannon entropy. Gradients flow into the
/// extractor and both heads; e stays fixed.
struct MemoLoss {
  double value = 0.0;
  nn::TwoHeadGrads grads;
};
MemoLoss memo_marginal_loss(const TwoHeadModel& model,
                            const std::vector<Vector>& views, double e_star);

/// In-place episodic fine-tuning of a model copy: config.ft_steps SGD steps
/// at config.ft_lr on the marginal entropy of config.ft_augments views.
void memo_finetune(TwoHeadModel& model, std::span<const double> x, double e_star,
                   const AdaptConfig& config, const AugmentationSpec& aug,
                   RngStream& rng);

/// Same objective for a single-head model (the plain test-time tuning
/// baselines on the global or fine-tuned personalized model).
void memo_finetune_single(Extractor& extractor, Head& head, std::span<const double> x,
                          const AdaptConfig& config, const AugmentationSpec& aug,
                          RngStream& rng);

}  // namespace fedthe::tta
