#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "fedthe/nn/tensor.hpp"

namespace fedthe::harness {

/// Central finite differences of a scalar function over a flat parameter
/// vector; returns the worst relative error against `analytic`.
double gradient_check(const std::function<double(const nn::Vector&)>& f,
                      const nn::Vector& at, const nn::Vector& analytic,
                      double perturbation = 1e-4);

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs the full invariant suite (gradient soundness, softmax/entropy
/// properties, aggregation oracle, partition statistics, symmetry fixed
/// point, EMA closed form, determinism) and prints one verdict line each.
bool selftest(std::ostream& out);

std::vector<SelftestResult> run_selftest_checks();

}  // namespace fedthe::harness
