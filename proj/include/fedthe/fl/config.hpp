#pragma once

#include <cstdint>
#include <vector>

namespace fedthe::fl {

/// Extractor layer widths plus head size; dims = {input, hidden..., feature}.
struct ModelConfig {
  std::vector<std::size_t> extractor_dims;
  std::size_t num_classes = 0;
};

struct TrainConfig {
  int rounds = 30;
  double participation_ratio = 1.0;
  int local_epochs = 5;
  int personalization_epochs = 1;
  int batch_size = 32;
  double lr = 0.01;
  double weight_decay = 5e-4;
  bool balanced_softmax = false;
  /// Warm-start the personalized head across rounds by default; set to
  /// re-initialize it from the received global head each round.
  bool reinit_personal_head = false;
  std::uint64_t seed = 0;

  void validate() const;
};

}  // namespace fedthe::fl
