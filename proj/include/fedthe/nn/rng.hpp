#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedthe::nn {

/// Deterministic random stream. The engine is std::mt19937_64 (bit-exact by
/// the standard); all distributions are implemented here because the standard
/// library's distribution objects are implementation-defined and would break
/// cross-platform reproducibility.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). Rejection sampling on a power-of-two mask.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (second value cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Gamma(shape, 1) via Marsaglia-Tsang, with the usual boost for shape < 1.
  double gamma(double shape);

  /// Proportions from a symmetric Dirichlet(alpha) over `k` components.
  std::vector<double> dirichlet(double alpha, std::size_t k);

  /// +1 or -1 with equal probability.
  double sign() { return (engine_() & 1u) ? 1.0 : -1.0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// `k` distinct values from {0, ..., n-1}, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// Derives a decorrelated seed from a base seed and a tag (splitmix64 mixing).
/// Chain calls to scope streams per round/client/phase.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace fedthe::nn
