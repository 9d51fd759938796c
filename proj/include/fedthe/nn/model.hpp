#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedthe/nn/rng.hpp"
#include "fedthe/nn/tensor.hpp"

namespace fedthe::nn {

/// Affine layer y = W x + b.
struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  Vector bias;     // out_dim

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

/// Uniform +-1/sqrt(fan_in) init for weights and bias.
DenseLayer make_dense_layer(std::size_t out_dim, std::size_t in_dim, RngStream& rng);

Vector affine(const DenseLayer& layer, std::span<const double> x);

/// Stack of dense layers with ReLU between them and no activation after the
/// last layer, producing the feature vector h.
struct Extractor {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t feature_dim() const { return layers.back().out_dim(); }
};

/// Single FC classification head on top of the extracted feature.
struct Head {
  DenseLayer fc;  // num_classes x feature_dim

  std::size_t num_classes() const { return fc.out_dim(); }
  std::size_t feature_dim() const { return fc.in_dim(); }
};

/// Shared feature extractor with a globally aggregated head and a locally
/// kept personalized head.
struct TwoHeadModel {
  Extractor extractor;
  Head global_head;
  Head personal_head;
};

/// dims = {input, hidden..., feature}; at least one layer.
Extractor make_extractor(const std::vector<std::size_t>& dims, RngStream& rng);
Head make_head(std::size_t num_classes, std::size_t feature_dim, RngStream& rng);

Vector forward_extract(const Extractor& extractor, std::span<const double> x);
Vector forward_head(const Head& head, std::span<const double> h);

/// Activations recorded by a forward pass, consumed by the backward pass.
struct ExtractorTrace {
  Vector input;
  std::vector<Vector> pre_activations;   // affine outputs per layer
  std::vector<Vector> post_activations;  // after ReLU (all but the last layer)
};

Vector forward_extract_traced(const Extractor& extractor, std::span<const double> x,
                              ExtractorTrace& trace);

struct DenseGrads {
  Matrix weights;
  Vector bias;
};

struct ExtractorGrads {
  std::vector<DenseGrads> layers;
};

struct HeadGrads {
  DenseGrads fc;
};

struct TwoHeadGrads {
  ExtractorGrads extractor;
  HeadGrads global_head;
  HeadGrads personal_head;
};

ExtractorGrads zero_grads(const Extractor& extractor);
HeadGrads zero_grads(const Head& head);
TwoHeadGrads zero_grads(const TwoHeadModel& model);

void scale_grads(ExtractorGrads& g, double s);
void scale_grads(HeadGrads& g, double s);

/// Accumulates head gradients for one sample and returns dL/dh.
Vector backward_head(const Head& head, std::span<const double> h,
                     std::span<const double> dlogits, HeadGrads& grads);

/// Accumulates extractor gradients given dL/dh and the recorded trace.
/// Throws if the trace does not match the extractor (backward without a
/// matching forward).
void backward_extract(const Extractor& extractor, const ExtractorTrace& trace,
                      std::span<const double> dfeature, ExtractorGrads& grads);

/// FNV-1a over the exact parameter bytes; used to assert parameter isolation.
std::uint64_t parameter_fingerprint(const Extractor& extractor);
std::uint64_t parameter_fingerprint(const Head& head);
std::uint64_t parameter_fingerprint(const TwoHeadModel& model);

}  // namespace fedthe::nn
