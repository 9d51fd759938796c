#include "fedthe/tta/predict.hpp"

#include <algorithm>
#include <stdexcept>

#include "fedthe/nn/losses.hpp"

namespace fedthe::tta {

std::string to_string(Method method) {
  switch (method) {
    case Method::Global: return "global";
    case Method::FedavgFt: return "fedavg_ft";
    case Method::MemoG: return "memo_g";
    case Method::MemoP: return "memo_p";
    case Method::FedThe: return "fedthe";
    case Method::FedThePlus: return "fedthe_plus";
  }
  throw std::invalid_argument("to_string: unknown Method");
}

Method method_from_string(const std::string& name) {
  if (name == "global") return Method::Global;
  if (name == "fedavg_ft") return Method::FedavgFt;
  if (name == "memo_g") return Method::MemoG;
  if (name == "memo_p") return Method::MemoP;
  if (name == "fedthe") return Method::FedThe;
  if (name == "fedthe_plus") return Method::FedThePlus;
  throw std::invalid_argument("unknown method: " + name);
}

EvalContext make_eval_context(const fl::ServerState& server,
                              const fl::ClientState& client,
                              const fl::FineTunedModel* fine_tuned,
                              const AdaptConfig& adapt, double sigma_data,
                              std::uint64_t seed) {
  EvalContext ctx;
  ctx.client_id = client.client_id;
  ctx.extractor = &server.extractor;
  ctx.global_head = &server.global_head;
  ctx.personal_head = &client.personal_head;
  if (server.global_descriptor) {
    ctx.global_descriptor = *server.global_descriptor;
  }
  if (client.local_descriptor) {
    ctx.local_descriptor = *client.local_descriptor;
  }
  ctx.fine_tuned = fine_tuned;
  ctx.adapt = adapt;
  ctx.augmentation.sigma_data = sigma_data;
  ctx.seed = seed;
  return ctx;
}

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void record(StreamResult& out, int prediction, int label) {
  out.predictions.push_back(prediction);
  const bool ok = prediction == label;
  out.correct.push_back(ok);
  out.num_correct += ok ? 1 : 0;
}

struct EnsembleSample {
  Vector feature;
  Vector global_logits;
  Vector local_logits;
  Vector smoothed;
};

EnsembleSample prepare_sample(const EvalContext& ctx, std::span<const double> x,
                              HistoryState& history) {
  EnsembleSample s;
  s.feature = nn::forward_extract(*ctx.extractor, x);
  s.global_logits = nn::forward_head(*ctx.global_head, s.feature);
  s.local_logits = nn::forward_head(*ctx.personal_head, s.feature);
  s.smoothed = ctx.adapt.use_history
                   ? smooth_feature(s.feature, history, ctx.adapt.beta)
                   : s.feature;
  return s;
}

int ensemble_predict(const EvalContext& ctx, Method method,
                     std::span<const double> x, const EnsembleSample& s,
                     double e_star, RngStream& rng) {
  if (method == Method::FedThePlus && ctx.adapt.ft_enabled &&
      ctx.adapt.ft_steps > 0) {
    // Episodic: the fine-tuned copy lives only for this sample.
    TwoHeadModel model{*ctx.extractor, *ctx.global_head, *ctx.personal_head};
    memo_finetune(model, x, e_star, ctx.adapt, ctx.augmentation, rng);
    const Vector h = nn::forward_extract(model.extractor, x);
    return argmax(ensemble_logits(nn::forward_head(model.global_head, h),
                                  nn::forward_head(model.personal_head, h), e_star));
  }
  return argmax(ensemble_logits(s.global_logits, s.local_logits, e_star));
}

StreamResult run_ensemble_method(Method method, const EvalContext& ctx,
                                 StreamKind kind, const LabeledSet& stream,
                                 RngStream& rng) {
  if (ctx.global_descriptor.empty() || ctx.local_descriptor.empty()) {
    throw std::invalid_argument(
        "predict_stream: ensemble methods need global and local descriptors "
        "from a completed training run");
  }
  StreamResult out;
  HistoryState history;

  auto emit = [&](std::size_t index, const EnsembleSample& s, double e_star) {
    RngStream sample_rng(nn::mix_seed(rng.next_u64(), index));
    const int pred =
        ensemble_predict(ctx, method, stream.input(index), s, e_star, sample_rng);
    record(out, pred, stream.labels[index]);
    out.e_trace.push_back(ETraceRow{ctx.client_id, kind, static_cast<int>(index),
                                    1.0 - e_star, out.correct.back()});
  };

  if (!ctx.adapt.batch_wise) {
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const EnsembleSample s = prepare_sample(ctx, stream.input(i), history);
      const double e_star =
          optimize_e(s.global_logits, s.local_logits, s.smoothed,
                     ctx.global_descriptor, ctx.local_descriptor, ctx.adapt);
      if (ctx.adapt.use_history) {
        update_history(history, s.feature, ctx.adapt.alpha);
      }
      emit(i, s, e_star);
    }
    return out;
  }

  // Batch-wise: one ensemble weight per batch; smoothing uses the history as
  // of batch start, then the EMA absorbs the batch in sample order.
  for (std::size_t start = 0; start < stream.size();
       start += static_cast<std::size_t>(ctx.adapt.batch_size)) {
    const std::size_t end =
        std::min(stream.size(), start + static_cast<std::size_t>(ctx.adapt.batch_size));
    std::vector<EnsembleSample> samples;
    std::vector<Vector> yg, yl, smoothed;
    for (std::size_t i = start; i < end; ++i) {
      samples.push_back(prepare_sample(ctx, stream.input(i), history));
      yg.push_back(samples.back().global_logits);
      yl.push_back(samples.back().local_logits);
      smoothed.push_back(samples.back().smoothed);
    }
    const double e_star = optimize_e_batch(yg, yl, smoothed, ctx.global_descriptor,
                                           ctx.local_descriptor, ctx.adapt);
    for (std::size_t i = start; i < end; ++i) {
      if (ctx.adapt.use_history) {
        update_history(history, samples[i - start].feature, ctx.adapt.alpha);
      }
      emit(i, samples[i - start], e_star);
    }
  }
  return out;
}

StreamResult run_plain_model(const Extractor& extractor, const Head& head,
                             const LabeledSet& stream) {
  StreamResult out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Vector h = nn::forward_extract(extractor, stream.input(i));
    record(out, argmax(nn::forward_head(head, h)), stream.labels[i]);
  }
  return out;
}

StreamResult run_memo_single(const Extractor& extractor, const Head& head,
                             const EvalContext& ctx, const LabeledSet& stream,
                             RngStream& rng) {
  StreamResult out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    Extractor adapted_extractor = extractor;
    Head adapted_head = head;
    RngStream sample_rng(nn::mix_seed(rng.next_u64(), i));
    memo_finetune_single(adapted_extractor, adapted_head, stream.input(i), ctx.adapt,
                         ctx.augmentation, sample_rng);
    const Vector h = nn::forward_extract(adapted_extractor, stream.input(i));
    record(out, argmax(nn::forward_head(adapted_head, h)), stream.labels[i]);
  }
  return out;
}

}  // namespace

StreamResult predict_stream(Method method, const EvalContext& ctx, StreamKind kind,
                            const LabeledSet& stream) {
  if (stream.size() == 0) {
    throw std::invalid_argument("predict_stream: empty stream");
  }
  if (stream.dim() != ctx.extractor->input_dim()) {
    throw std::invalid_argument("predict_stream: stream dimension mismatch");
  }
  RngStream rng(nn::mix_seed(nn::mix_seed(ctx.seed, static_cast<std::uint64_t>(method)),
                             static_cast<std::uint64_t>(kind)));
  switch (method) {
    case Method::Global:
      return run_plain_model(*ctx.extractor, *ctx.global_head, stream);
    case Method::FedavgFt:
      if (!ctx.fine_tuned) {
        throw std::invalid_argument("predict_stream: missing fine-tuned model");
      }
      return run_plain_model(ctx.fine_tuned->extractor, ctx.fine_tuned->head, stream);
    case Method::MemoG:
      return run_memo_single(*ctx.extractor, *ctx.global_head, ctx, stream, rng);
    case Method::MemoP:
      if (!ctx.fine_tuned) {
        throw std::invalid_argument("predict_stream: missing fine-tuned model");
      }
      return run_memo_single(ctx.fine_tuned->extractor, ctx.fine_tuned->head, ctx,
                             stream, rng);
    case Method::FedThe:
    case Method::FedThePlus:
      return run_ensemble_method(method, ctx, kind, stream, rng);
  }
  throw std::invalid_argument("predict_stream: unknown method");
}

}  // namespace fedthe::tta
