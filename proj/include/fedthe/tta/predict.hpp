#pragma once

#include <string>
#include <vector>

#include "fedthe/data/streams.hpp"
#include "fedthe/fl/runtime.hpp"
#include "fedthe/tta/adapt.hpp"
#include "fedthe/tta/ensemble.hpp"

namespace fedthe::tta {

using data::LabeledSet;
using data::StreamKind;

enum class Method { Global, FedavgFt, MemoG, MemoP, FedThe, FedThePlus };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

/// One line of the ensemble-weight trace, written per adapted test sample.
struct ETraceRow {
  int client = -1;
  StreamKind stream = StreamKind::Id;
  int sample_index = 0;
  double one_minus_e = 0.0;
  bool correct = false;
};

struct StreamResult {
  std::vector<int> predictions;
  std::vector<bool> correct;
  std::vector<ETraceRow> e_trace;  // only for the ensemble methods
  std::int64_t num_correct = 0;

  double accuracy() const {
    return predictions.empty() ? 0.0
                               : static_cast<double>(num_correct) /
                                     static_cast<double>(predictions.size());
  }
};

/// Everything a client needs to evaluate any method on its streams. The
/// fine-tuned model doubles as the personalized baseline and the base model
/// for test-time tuning of it.
struct EvalContext {
  int client_id = -1;
  const nn::Extractor* extractor = nullptr;
  const nn::Head* global_head = nullptr;
  const nn::Head* personal_head = nullptr;
  Vector global_descriptor;
  Vector local_descriptor;
  const fl::FineTunedModel* fine_tuned = nullptr;
  AdaptConfig adapt;
  AugmentationSpec augmentation;
  std::uint64_t seed = 0;
};

EvalContext make_eval_context(const fl::ServerState& server,
                              const fl::ClientState& client,
                              const fl::FineTunedModel* fine_tuned,
                              const AdaptConfig& adapt, double sigma_data,
                              std::uint64_t seed);

/// Processes the stream strictly in order. The test-history state starts
/// unset and persists across the whole stream; each call starts fresh.
StreamResult predict_stream(Method method, const EvalContext& ctx, StreamKind kind,
                            const LabeledSet& stream);

}  // namespace fedthe::tta
