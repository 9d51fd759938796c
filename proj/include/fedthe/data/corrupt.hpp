#pragma once

#include <cstddef>
#include <span>

#include "fedthe/data/dataset.hpp"
#include "fedthe/nn/rng.hpp"

namespace fedthe::data {

/// Per-severity corruption constants.
inline double additive_gauss_std(int severity, double sigma_data) {
  return 0.2 * severity * sigma_data;
}
inline double feature_scale_factor(int severity) { return 0.15 * severity; }
inline double mask_fraction(int severity) { return 0.08 * severity; }
inline double impulse_fraction(int severity) { return 0.04 * severity; }
inline std::size_t rounded_count(double fraction, std::size_t dim) {
  return static_cast<std::size_t>(fraction * static_cast<double>(dim) + 0.5);
}

/// Applies one corruption to a copy of x. sigma_data is the generator's
/// within-class std; severity is 1..5.
Vector corrupt(std::span<const double> x, CorruptionKind kind, int severity,
               double sigma_data, nn::RngStream& rng);

}  // namespace fedthe::data
