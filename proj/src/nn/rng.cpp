#include "fedthe/nn/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedthe::nn {

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("RngStream::below: n must be positive");
  }
  if ((n & (n - 1)) == 0) {
    return engine_() & (n - 1);
  }
  std::uint64_t mask = n - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  std::uint64_t r;
  do {
    r = engine_() & mask;
  } while (r >= n);
  return r;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

double RngStream::gamma(double shape) {
  if (shape <= 0.0) {
    throw std::invalid_argument("RngStream::gamma: shape must be positive");
  }
  if (shape < 1.0) {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) {
      return d * v;
    }
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::vector<double> RngStream::dirichlet(double alpha, std::size_t k) {
  if (alpha <= 0.0 || k == 0) {
    throw std::invalid_argument("RngStream::dirichlet: alpha > 0 and k >= 1 required");
  }
  std::vector<double> draws(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    draws[i] = gamma(alpha);
    total += draws[i];
  }
  if (total <= 0.0) {
    // Possible for tiny alpha where every gamma underflows; fall back to a
    // single random winner, the limiting Dir(alpha -> 0) behavior.
    draws.assign(k, 0.0);
    draws[below(k)] = 1.0;
    return draws;
  }
  for (double& d : draws) {
    d /= total;
  }
  return draws;
}

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n,
                                                               std::size_t k) {
  if (k > n) {
    throw std::invalid_argument("sample_without_replacement: k > n");
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool[i] = i;
  }
  // Partial Fisher-Yates: the first k slots end up with the sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) {
  // One splitmix64 round over the combined words.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fedthe::nn
