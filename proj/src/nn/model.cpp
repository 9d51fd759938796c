#include "fedthe/nn/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fedthe::nn {

DenseLayer make_dense_layer(std::size_t out_dim, std::size_t in_dim, RngStream& rng) {
  if (out_dim == 0 || in_dim == 0) {
    throw std::invalid_argument("make_dense_layer: zero dimension");
  }
  DenseLayer layer;
  layer.weights = Matrix(out_dim, in_dim);
  layer.bias.assign(out_dim, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& w : layer.weights.data) {
    w = rng.uniform(-bound, bound);
  }
  for (double& b : layer.bias) {
    b = rng.uniform(-bound, bound);
  }
  return layer;
}

Vector affine(const DenseLayer& layer, std::span<const double> x) {
  Vector y = matvec(layer.weights, x);
  axpy(y, layer.bias);
  return y;
}

Extractor make_extractor(const std::vector<std::size_t>& dims, RngStream& rng) {
  if (dims.size() < 2) {
    throw std::invalid_argument("make_extractor: need at least input and feature dims");
  }
  Extractor e;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    e.layers.push_back(make_dense_layer(dims[i + 1], dims[i], rng));
  }
  return e;
}

Head make_head(std::size_t num_classes, std::size_t feature_dim, RngStream& rng) {
  if (num_classes < 2) {
    throw std::invalid_argument("make_head: need at least two classes");
  }
  return Head{make_dense_layer(num_classes, feature_dim, rng)};
}

Vector forward_extract(const Extractor& extractor, std::span<const double> x) {
  if (extractor.layers.empty()) {
    throw std::invalid_argument("forward_extract: extractor has no layers");
  }
  Vector cur(x.begin(), x.end());
  for (std::size_t i = 0; i < extractor.layers.size(); ++i) {
    cur = affine(extractor.layers[i], cur);
    if (i + 1 < extractor.layers.size()) {
      for (double& v : cur) {
        v = v > 0.0 ? v : 0.0;
      }
    }
  }
  return cur;
}

Vector forward_extract_traced(const Extractor& extractor, std::span<const double> x,
                              ExtractorTrace& trace) {
  if (extractor.layers.empty()) {
    throw std::invalid_argument("forward_extract_traced: extractor has no layers");
  }
  trace.input.assign(x.begin(), x.end());
  trace.pre_activations.clear();
  trace.post_activations.clear();
  Vector cur = trace.input;
  for (std::size_t i = 0; i < extractor.layers.size(); ++i) {
    cur = affine(extractor.layers[i], cur);
    trace.pre_activations.push_back(cur);
    if (i + 1 < extractor.layers.size()) {
      for (double& v : cur) {
        v = v > 0.0 ? v : 0.0;
      }
      trace.post_activations.push_back(cur);
    }
  }
  return cur;
}

Vector forward_head(const Head& head, std::span<const double> h) {
  return affine(head.fc, h);
}

ExtractorGrads zero_grads(const Extractor& extractor) {
  ExtractorGrads g;
  for (const DenseLayer& layer : extractor.layers) {
    g.layers.push_back(DenseGrads{Matrix(layer.out_dim(), layer.in_dim()),
                                  Vector(layer.out_dim(), 0.0)});
  }
  return g;
}

HeadGrads zero_grads(const Head& head) {
  return HeadGrads{DenseGrads{Matrix(head.fc.out_dim(), head.fc.in_dim()),
                              Vector(head.fc.out_dim(), 0.0)}};
}

TwoHeadGrads zero_grads(const TwoHeadModel& model) {
  return TwoHeadGrads{zero_grads(model.extractor), zero_grads(model.global_head),
                      zero_grads(model.personal_head)};
}

void scale_grads(ExtractorGrads& g, double s) {
  for (DenseGrads& layer : g.layers) {
    for (double& v : layer.weights.data) {
      v *= s;
    }
    for (double& v : layer.bias) {
      v *= s;
    }
  }
}

void scale_grads(HeadGrads& g, double s) {
  for (double& v : g.fc.weights.data) {
    v *= s;
  }
  for (double& v : g.fc.bias) {
    v *= s;
  }
}

Vector backward_head(const Head& head, std::span<const double> h,
                     std::span<const double> dlogits, HeadGrads& grads) {
  if (h.size() != head.fc.in_dim() || dlogits.size() != head.fc.out_dim()) {
    throw std::invalid_argument("backward_head: shape mismatch");
  }
  add_outer(grads.fc.weights, dlogits, h);
  axpy(grads.fc.bias, dlogits);
  return matvec_transposed(head.fc.weights, dlogits);
}

void backward_extract(const Extractor& extractor, const ExtractorTrace& trace,
                      std::span<const double> dfeature, ExtractorGrads& grads) {
  const std::size_t n_layers = extractor.layers.size();
  if (trace.pre_activations.size() != n_layers ||
      trace.input.size() != extractor.input_dim()) {
    throw std::invalid_argument(
        "backward_extract: trace does not match extractor (run a traced forward first)");
  }
  if (dfeature.size() != extractor.feature_dim()) {
    throw std::invalid_argument("backward_extract: upstream gradient dim mismatch");
  }
  Vector delta(dfeature.begin(), dfeature.end());
  for (std::size_t i = n_layers; i-- > 0;) {
    if (i + 1 < n_layers) {
      // Upstream came through the ReLU after layer i.
      const Vector& pre = trace.pre_activations[i];
      for (std::size_t j = 0; j < delta.size(); ++j) {
        if (pre[j] <= 0.0) {
          delta[j] = 0.0;
        }
      }
    }
    const Vector& layer_input = (i == 0) ? trace.input : trace.post_activations[i - 1];
    add_outer(grads.layers[i].weights, delta, layer_input);
    axpy(grads.layers[i].bias, delta);
    if (i > 0) {
      delta = matvec_transposed(extractor.layers[i].weights, delta);
    }
  }
}

namespace {

void fnv_bytes(std::uint64_t& h, const void* p, std::size_t n) {
  const unsigned char* bytes = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_layer(std::uint64_t& h, const DenseLayer& layer) {
  fnv_bytes(h, layer.weights.data.data(), layer.weights.data.size() * sizeof(double));
  fnv_bytes(h, layer.bias.data(), layer.bias.size() * sizeof(double));
}

}  // namespace

std::uint64_t parameter_fingerprint(const Extractor& extractor) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const DenseLayer& layer : extractor.layers) {
    fnv_layer(h, layer);
  }
  return h;
}

std::uint64_t parameter_fingerprint(const Head& head) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_layer(h, head.fc);
  return h;
}

std::uint64_t parameter_fingerprint(const TwoHeadModel& model) {
  std::uint64_t h = parameter_fingerprint(model.extractor);
  h ^= parameter_fingerprint(model.global_head) + 0x9e3779b97f4a7c15ULL;
  h ^= parameter_fingerprint(model.personal_head) + 0x517cc1b727220a95ULL;
  return h;
}

}  // namespace fedthe::nn
