#include "fedthe/tta/adapt.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "fedthe/nn/losses.hpp"
#include "fedthe/nn/optim.hpp"

namespace fedthe::tta {

using nn::ExtractorTrace;
using nn::Matrix;

namespace {

double run_adam_on_scalars(const std::function<ScalarLoss(const EnsembleState&)>& loss,
                           const AdaptConfig& config) {
  EnsembleState ens;  // (0, 0): e starts at 0.5 for every sample
  Vector params = {ens.a_global, ens.a_local};
  nn::AdamState adam(2, config.e_lr);
  for (int step = 0; step < config.e_steps; ++step) {
    ens.a_global = params[0];
    ens.a_local = params[1];
    const ScalarLoss l = loss(ens);
    const Vector grads = {l.d_a_global, l.d_a_local};
    nn::adam_step(params, grads, adam);
  }
  ens.a_global = params[0];
  ens.a_local = params[1];
  return ens.e();
}

}  // namespace

double optimize_e(std::span<const double> global_logits,
                  std::span<const double> local_logits,
                  std::span<const double> smoothed_feature,
                  std::span<const double> global_descriptor,
                  std::span<const double> local_descriptor, const AdaptConfig& config) {
  config.validate();
  if (config.pin_e) {
    return *config.pin_e;
  }
  return run_adam_on_scalars(
      [&](const EnsembleState& ens) {
        return the_loss(global_logits, local_logits, smoothed_feature,
                        global_descriptor, local_descriptor, ens, config.loss_mode);
      },
      config);
}

double optimize_e_batch(const std::vector<Vector>& global_logits,
                        const std::vector<Vector>& local_logits,
                        const std::vector<Vector>& smoothed_features,
                        std::span<const double> global_descriptor,
                        std::span<const double> local_descriptor,
                        const AdaptConfig& config) {
  config.validate();
  if (global_logits.empty() || global_logits.size() != local_logits.size() ||
      global_logits.size() != smoothed_features.size()) {
    throw std::invalid_argument("optimize_e_batch: inconsistent batch");
  }
  if (config.pin_e) {
    return *config.pin_e;
  }
  const double inv = 1.0 / static_cast<double>(global_logits.size());
  return run_adam_on_scalars(
      [&](const EnsembleState& ens) {
        ScalarLoss total;
        for (std::size_t i = 0; i < global_logits.size(); ++i) {
          const ScalarLoss l =
              the_loss(global_logits[i], local_logits[i], smoothed_features[i],
                       global_descriptor, local_descriptor, ens, config.loss_mode);
          total.value += inv * l.value;
          total.d_a_global += inv * l.d_a_global;
          total.d_a_local += inv * l.d_a_local;
        }
        return total;
      },
      config);
}

Vector apply_augment(const AugmentationSpec& spec, int kind, std::span<const double> x,
                     RngStream& rng) {
  Vector out(x.begin(), x.end());
  switch (kind) {
    case 0:  // identity
      return out;
    case 1: {  // additive jitter
      const double std = 0.1 * spec.sigma_data;
      for (double& v : out) {
        v += rng.normal(0.0, std);
      }
      return out;
    }
    case 2: {  // scale +-10%
      const double factor = 1.0 + 0.1 * rng.sign();
      for (double& v : out) {
        v *= factor;
      }
      return out;
    }
    case 3: {  // dropout 10%
      for (double& v : out) {
        if (rng.uniform() < 0.1) {
          v = 0.0;
        }
      }
      return out;
    }
    default:
      throw std::invalid_argument("apply_augment: unknown kind");
  }
}

Vector augment(const AugmentationSpec& spec, std::span<const double> x,
               RngStream& rng) {
  const int kind = static_cast<int>(rng.below(kNumAugmentKinds));
  return apply_augment(spec, kind, x, rng);
}

namespace {

/// Shared marginal-entropy backward pass. logits_fn maps a feature to the
/// prediction logits; backward_fn routes dL/dlogits into parameter grads and
/// returns dL/dfeature.
template <typename LogitsFn, typename BackwardFn>
double marginal_entropy_backward(const Extractor& extractor,
                                 const std::vector<Vector>& views,
                                 nn::ExtractorGrads& extractor_grads,
                                 LogitsFn&& logits_fn, BackwardFn&& backward_fn) {
  if (views.empty()) {
    throw std::invalid_argument("memo: need at least one view");
  }
  const std::size_t B = views.size();
  std::vector<ExtractorTrace> traces(B);
  std::vector<Vector> features(B);
  std::vector<Vector> probs(B);
  Vector marginal;
  for (std::size_t b = 0; b < B; ++b) {
    features[b] = nn::forward_extract_traced(extractor, views[b], traces[b]);
    probs[b] = nn::softmax(logits_fn(features[b]));
    if (marginal.empty()) {
      marginal.assign(probs[b].size(), 0.0);
    }
    nn::axpy(marginal, probs[b], 1.0 / static_cast<double>(B));
  }

  double loss = 0.0;
  Vector dmarginal(marginal.size());
  for (std::size_t i = 0; i < marginal.size(); ++i) {
    loss -= marginal[i] * std::log(marginal[i]);
    dmarginal[i] = -(std::log(marginal[i]) + 1.0);
  }

  for (std::size_t b = 0; b < B; ++b) {
    // Through the mean, then the per-view softmax Jacobian.
    Vector dprob(dmarginal.size());
    for (std::size_t i = 0; i < dprob.size(); ++i) {
      dprob[i] = dmarginal[i] / static_cast<double>(B);
    }
    const double inner = nn::dot(probs[b], dprob);
    Vector dlogits(dprob.size());
    for (std::size_t i = 0; i < dprob.size(); ++i) {
      dlogits[i] = probs[b][i] * (dprob[i] - inner);
    }
    const Vector dfeature = backward_fn(features[b], dlogits);
    nn::backward_extract(extractor, traces[b], dfeature, extractor_grads);
  }
  return loss;
}

}  // namespace

MemoLoss memo_marginal_loss(const TwoHeadModel& model, const std::vector<Vector>& views,
                            double e_star) {
  MemoLoss out;
  out.grads = nn::zero_grads(model);
  out.value = marginal_entropy_backward(
      model.extractor, views, out.grads.extractor,
      [&](const Vector& h) {
        return ensemble_logits(nn::forward_head(model.global_head, h),
                               nn::forward_head(model.personal_head, h), e_star);
      },
      [&](const Vector& h, const Vector& dlogits) {
        Vector dlogits_global(dlogits.size());
        Vector dlogits_local(dlogits.size());
        for (std::size_t i = 0; i < dlogits.size(); ++i) {
          dlogits_global[i] = e_star * dlogits[i];
          dlogits_local[i] = (1.0 - e_star) * dlogits[i];
        }
        Vector dh = nn::backward_head(model.global_head, h, dlogits_global,
                                      out.grads.global_head);
        nn::axpy(dh, nn::backward_head(model.personal_head, h, dlogits_local,
                                       out.grads.personal_head));
        return dh;
      });
  return out;
}

namespace {

std::vector<Vector> draw_views(const AugmentationSpec& aug, std::span<const double> x,
                               int count, RngStream& rng) {
  std::vector<Vector> views;
  views.reserve(count);
  for (int b = 0; b < count; ++b) {
    views.push_back(augment(aug, x, rng));
  }
  return views;
}

}  // namespace

void memo_finetune(TwoHeadModel& model, std::span<const double> x, double e_star,
                   const AdaptConfig& config, const AugmentationSpec& aug,
                   RngStream& rng) {
  config.validate();
  const std::vector<Vector> views = draw_views(aug, x, config.ft_augments, rng);
  for (int step = 0; step < config.ft_steps; ++step) {
    MemoLoss loss = memo_marginal_loss(model, views, e_star);
    nn::sgd_step(model.extractor, loss.grads.extractor, config.ft_lr);
    nn::sgd_step(model.global_head, loss.grads.global_head, config.ft_lr);
    nn::sgd_step(model.personal_head, loss.grads.personal_head, config.ft_lr);
  }
}

void memo_finetune_single(Extractor& extractor, Head& head, std::span<const double> x,
                          const AdaptConfig& config, const AugmentationSpec& aug,
                          RngStream& rng) {
  config.validate();
  const std::vector<Vector> views = draw_views(aug, x, config.ft_augments, rng);
  for (int step = 0; step < config.ft_steps; ++step) {
    nn::ExtractorGrads eg = nn::zero_grads(extractor);
    nn::HeadGrads hg = nn::zero_grads(head);
    marginal_entropy_backward(
        extractor, views, eg,
        [&](const Vector& h) { return nn::forward_head(head, h); },
        [&](const Vector& h, const Vector& dlogits) {
          return nn::backward_head(head, h, dlogits, hg);
        });
    nn::sgd_step(extractor, eg, config.ft_lr);
    nn::sgd_step(head, hg, config.ft_lr);
  }
}

}  // namespace fedthe::tta
