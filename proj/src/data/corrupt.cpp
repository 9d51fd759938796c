#include "fedthe/data/corrupt.hpp"

#include <stdexcept>

namespace fedthe::data {

Vector corrupt(std::span<const double> x, CorruptionKind kind, int severity,
               double sigma_data, nn::RngStream& rng) {
  if (severity < 1 || severity > 5) {
    throw std::invalid_argument("corrupt: severity must be in 1..5");
  }
  Vector out(x.begin(), x.end());
  switch (kind) {
    case CorruptionKind::AdditiveGauss: {
      const double std = additive_gauss_std(severity, sigma_data);
      for (double& v : out) {
        v += rng.normal(0.0, std);
      }
      return out;
    }
    case CorruptionKind::FeatureScale: {
      // One shared direction per call, applied to the whole vector.
      const double factor = 1.0 + feature_scale_factor(severity) * rng.sign();
      for (double& v : out) {
        v *= factor;
      }
      return out;
    }
    case CorruptionKind::FeatureMask: {
      const std::size_t n_mask = rounded_count(mask_fraction(severity), out.size());
      for (std::size_t i : rng.sample_without_replacement(out.size(), n_mask)) {
        out[i] = 0.0;
      }
      return out;
    }
    case CorruptionKind::Impulse: {
      const std::size_t n_spike =
          rounded_count(impulse_fraction(severity), out.size());
      for (std::size_t i : rng.sample_without_replacement(out.size(), n_spike)) {
        out[i] = 3.0 * sigma_data * rng.sign();
      }
      return out;
    }
  }
  throw std::invalid_argument("corrupt: unknown corruption kind");
}

}  // namespace fedthe::data
