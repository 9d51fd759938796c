#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedthe/nn/tensor.hpp"

namespace fedthe::data {

using nn::Matrix;
using nn::Vector;

enum class CorruptionKind { AdditiveGauss, FeatureScale, FeatureMask, Impulse };
constexpr int kNumCorruptionKinds = 4;

/// Test-distribution identifiers; also used as per-sample provenance so a
/// mixture stream can be audited.
enum class StreamKind {
  Id,
  Corrupted,
  NaturalShift,
  OutOfClient,
  Mixture,
  CorruptedOutOfClient,
};

std::string to_string(StreamKind kind);
StreamKind stream_kind_from_string(const std::string& name);
std::string to_string(CorruptionKind kind);

struct Provenance {
  int source_client = -1;
  StreamKind origin = StreamKind::Id;
  int corruption = -1;  // CorruptionKind index, -1 if uncorrupted
};

/// Feature vectors with integer class labels and per-sample provenance.
struct LabeledSet {
  Matrix inputs;  // n x dim
  std::vector<int> labels;
  std::vector<Provenance> provenance;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols; }
  std::span<const double> input(std::size_t i) const { return inputs.row(i); }

  std::vector<std::int64_t> class_counts() const;

  void reserve(std::size_t n, std::size_t dim);
  void append(std::span<const double> x, int label, Provenance prov);
  LabeledSet subset(const std::vector<std::size_t>& indices) const;
};

/// Class-conditional isotropic Gaussian generator; the per-class shift deltas
/// define the naturally-shifted analog of the base distribution.
struct GeneratorSpec {
  int num_classes = 0;
  int input_dim = 0;
  std::vector<Vector> class_means;
  double within_class_std = 1.0;
  std::vector<Vector> natural_shift_delta;
  std::uint64_t seed = 0;

  void validate() const;

  /// Random class means with entries N(0, mean_scale^2); shift deltas are
  /// random directions scaled to shift_ratio times the minimum inter-class
  /// mean distance.
  static GeneratorSpec make_random(int num_classes, int input_dim, double mean_scale,
                                   double within_class_std, double shift_ratio,
                                   std::uint64_t seed);
};

/// n_per_class i.i.d. samples per class, deterministic under spec.seed.
LabeledSet generate_base(const GeneratorSpec& spec, int n_per_class);

/// Draws from the shifted generator (means + delta) with the requested
/// per-class counts; used to build the naturally shifted test streams.
LabeledSet generate_shifted(const GeneratorSpec& spec,
                            const std::vector<std::int64_t>& per_class_counts,
                            std::uint64_t seed);

}  // namespace fedthe::data
