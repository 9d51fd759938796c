#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedthe/data/partition.hpp"
#include "fedthe/fl/config.hpp"
#include "fedthe/tta/ensemble.hpp"
#include "fedthe/tta/predict.hpp"

namespace fedthe::harness {

/// Synthetic data settings; the generator itself is derived per seed.
struct DataConfig {
  int num_classes = 10;
  int input_dim = 32;
  int n_per_class = 270;
  double mean_scale = 0.4;
  double within_class_std = 1.0;
  double natural_shift_ratio = 0.5;
};

struct PartitionConfig {
  int clients = 8;
  double alpha = 0.1;
};

struct ExperimentConfig {
  DataConfig data;
  PartitionConfig partition;
  std::vector<std::size_t> hidden_dims = {64};
  std::size_t feature_dim = 32;
  fl::TrainConfig train;
  tta::AdaptConfig adapt;
  int severity = 5;
  std::vector<tta::Method> methods;
  std::vector<data::StreamKind> streams;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";

  void validate() const;
  fl::ModelConfig model_config() const;
  data::GeneratorSpec generator_for_seed(std::uint64_t seed) const;
};

/// Error with the offending line/field attached.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig default_config();

/// key = value text format, '#' comments; unknown keys are rejected.
/// Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

}  // namespace fedthe::harness
