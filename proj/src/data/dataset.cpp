#include "fedthe/data/dataset.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedthe/nn/rng.hpp"

namespace fedthe::data {

using nn::RngStream;

std::string to_string(StreamKind kind) {
  switch (kind) {
    case StreamKind::Id: return "id";
    case StreamKind::Corrupted: return "corrupted";
    case StreamKind::NaturalShift: return "natural_shift";
    case StreamKind::OutOfClient: return "ooc";
    case StreamKind::Mixture: return "mixture";
    case StreamKind::CorruptedOutOfClient: return "corrupted_ooc";
  }
  throw std::invalid_argument("to_string: unknown StreamKind");
}

StreamKind stream_kind_from_string(const std::string& name) {
  if (name == "id") return StreamKind::Id;
  if (name == "corrupted") return StreamKind::Corrupted;
  if (name == "natural_shift") return StreamKind::NaturalShift;
  if (name == "ooc") return StreamKind::OutOfClient;
  if (name == "mixture") return StreamKind::Mixture;
  if (name == "corrupted_ooc") return StreamKind::CorruptedOutOfClient;
  throw std::invalid_argument("unknown stream kind: " + name);
}

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::AdditiveGauss: return "additive_gauss";
    case CorruptionKind::FeatureScale: return "feature_scale";
    case CorruptionKind::FeatureMask: return "feature_mask";
    case CorruptionKind::Impulse: return "impulse";
  }
  throw std::invalid_argument("to_string: unknown CorruptionKind");
}

std::vector<std::int64_t> LabeledSet::class_counts() const {
  std::vector<std::int64_t> counts(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw std::logic_error("LabeledSet: label out of range");
    }
    ++counts[y];
  }
  return counts;
}

void LabeledSet::reserve(std::size_t n, std::size_t d) {
  inputs.cols = d;
  inputs.data.reserve(n * d);
  labels.reserve(n);
  provenance.reserve(n);
}

void LabeledSet::append(std::span<const double> x, int label, Provenance prov) {
  if (inputs.rows == 0 && inputs.cols == 0) {
    inputs.cols = x.size();
  }
  if (x.size() != inputs.cols) {
    throw std::invalid_argument("LabeledSet::append: dimension mismatch");
  }
  inputs.data.insert(inputs.data.end(), x.begin(), x.end());
  inputs.rows += 1;
  labels.push_back(label);
  provenance.push_back(prov);
}

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& indices) const {
  LabeledSet out;
  out.num_classes = num_classes;
  out.reserve(indices.size(), dim());
  out.inputs.cols = dim();
  for (std::size_t i : indices) {
    if (i >= size()) {
      throw std::out_of_range("LabeledSet::subset: index out of range");
    }
    out.append(input(i), labels[i], provenance[i]);
  }
  return out;
}

void GeneratorSpec::validate() const {
  if (num_classes < 2 || input_dim < 1) {
    throw std::invalid_argument("GeneratorSpec: need >= 2 classes and dim >= 1");
  }
  if (class_means.size() != static_cast<std::size_t>(num_classes) ||
      natural_shift_delta.size() != static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("GeneratorSpec: means/deltas must cover every class");
  }
  for (const Vector& m : class_means) {
    if (m.size() != static_cast<std::size_t>(input_dim)) {
      throw std::invalid_argument("GeneratorSpec: mean dimension mismatch");
    }
  }
  for (const Vector& d : natural_shift_delta) {
    if (d.size() != static_cast<std::size_t>(input_dim)) {
      throw std::invalid_argument("GeneratorSpec: delta dimension mismatch");
    }
  }
  if (within_class_std < 0.0) {
    throw std::invalid_argument("GeneratorSpec: negative std");
  }
}

GeneratorSpec GeneratorSpec::make_random(int num_classes, int input_dim,
                                         double mean_scale, double within_class_std,
                                         double shift_ratio, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.num_classes = num_classes;
  spec.input_dim = input_dim;
  spec.within_class_std = within_class_std;
  spec.seed = seed;
  RngStream rng(nn::mix_seed(seed, 0x6d65616e73ULL));  // "means"
  for (int c = 0; c < num_classes; ++c) {
    Vector mean(input_dim);
    for (double& v : mean) {
      v = rng.normal(0.0, mean_scale);
    }
    spec.class_means.push_back(std::move(mean));
  }
  double min_sep = std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_classes; ++a) {
    for (int b = a + 1; b < num_classes; ++b) {
      min_sep = std::min(min_sep, nn::l2_distance(spec.class_means[a],
                                                  spec.class_means[b]));
    }
  }
  const double delta_norm = shift_ratio * min_sep;
  for (int c = 0; c < num_classes; ++c) {
    Vector dir(input_dim);
    double norm = 0.0;
    do {
      for (double& v : dir) {
        v = rng.normal();
      }
      norm = nn::l2_norm(dir);
    } while (norm == 0.0);
    for (double& v : dir) {
      v *= delta_norm / norm;
    }
    spec.natural_shift_delta.push_back(std::move(dir));
  }
  return spec;
}

namespace {

LabeledSet generate_from_means(const GeneratorSpec& spec,
                               const std::vector<Vector>& means,
                               const std::vector<std::int64_t>& per_class_counts,
                               StreamKind origin, std::uint64_t seed) {
  LabeledSet out;
  out.num_classes = spec.num_classes;
  std::int64_t total = 0;
  for (std::int64_t c : per_class_counts) {
    total += c;
  }
  out.reserve(static_cast<std::size_t>(total), spec.input_dim);
  out.inputs.cols = static_cast<std::size_t>(spec.input_dim);
  RngStream rng(seed);
  Vector x(spec.input_dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (std::int64_t i = 0; i < per_class_counts[c]; ++i) {
      for (int d = 0; d < spec.input_dim; ++d) {
        x[d] = means[c][d] + spec.within_class_std * rng.normal();
      }
      out.append(x, c, Provenance{-1, origin, -1});
    }
  }
  return out;
}

}  // namespace

LabeledSet generate_base(const GeneratorSpec& spec, int n_per_class) {
  spec.validate();
  if (n_per_class < 1) {
    throw std::invalid_argument("generate_base: n_per_class must be >= 1");
  }
  std::vector<std::int64_t> counts(spec.num_classes, n_per_class);
  return generate_from_means(spec, spec.class_means, counts, StreamKind::Id,
                             nn::mix_seed(spec.seed, 0x62617365ULL));  // "base"
}

LabeledSet generate_shifted(const GeneratorSpec& spec,
                            const std::vector<std::int64_t>& per_class_counts,
                            std::uint64_t seed) {
  spec.validate();
  if (per_class_counts.size() != static_cast<std::size_t>(spec.num_classes)) {
    throw std::invalid_argument("generate_shifted: counts must cover every class");
  }
  std::vector<Vector> shifted = spec.class_means;
  for (int c = 0; c < spec.num_classes; ++c) {
    nn::axpy(shifted[c], spec.natural_shift_delta[c]);
  }
  return generate_from_means(spec, shifted, per_class_counts, StreamKind::NaturalShift,
                             seed);
}

}  // namespace fedthe::data
