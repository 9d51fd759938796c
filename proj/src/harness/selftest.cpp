#include "fedthe/harness/selftest.hpp"

#include <cmath>
#include <cstdio>

#include "fedthe/data/partition.hpp"
#include "fedthe/fl/runtime.hpp"
#include "fedthe/nn/losses.hpp"
#include "fedthe/nn/model.hpp"
#include "fedthe/nn/rng.hpp"
#include "fedthe/tta/adapt.hpp"
#include "fedthe/tta/ensemble.hpp"

namespace fedthe::harness {

using nn::RngStream;
using nn::Vector;

double gradient_check(const std::function<double(const nn::Vector&)>& f,
                      const nn::Vector& at, const nn::Vector& analytic,
                      double perturbation) {
  double worst = 0.0;
  Vector x = at;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + perturbation;
    const double up = f(x);
    x[i] = keep - perturbation;
    const double down = f(x);
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * perturbation);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

namespace {

Vector random_vector(std::size_t n, RngStream& rng, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) {
    x = rng.normal(0.0, scale);
  }
  return v;
}

SelftestResult check_loss_gradients() {
  RngStream rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t C = 3 + rng.below(8);
    const Vector z = random_vector(C, rng, 2.0);
    const int label = static_cast<int>(rng.below(C));

    const nn::LossGrad ce = nn::cross_entropy(z, label);
    worst = std::max(worst, gradient_check(
        [&](const Vector& v) { return nn::cross_entropy(v, label).value; }, z,
        ce.dlogits));

    const nn::LossGrad ent = nn::shannon_entropy(z);
    worst = std::max(worst, gradient_check(
        [&](const Vector& v) { return nn::shannon_entropy(v).value; }, z,
        ent.dlogits));

    std::vector<std::int64_t> counts(C);
    for (auto& c : counts) {
      c = 1 + static_cast<std::int64_t>(rng.below(50));
    }
    const nn::LossGrad bce = nn::balanced_cross_entropy(z, label, counts);
    worst = std::max(worst, gradient_check(
        [&](const Vector& v) { return nn::balanced_cross_entropy(v, label, counts).value; },
        z, bce.dlogits));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e", worst);
  return {"loss gradients vs finite differences", worst < 1e-4, buf};
}

SelftestResult check_ensemble_gradients() {
  RngStream rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t C = 4 + rng.below(6);
    const std::size_t d = 4 + rng.below(6);
    const Vector yg = random_vector(C, rng, 2.0);
    const Vector yl = random_vector(C, rng, 2.0);
    const Vector hs = random_vector(d, rng);
    const Vector hg = random_vector(d, rng);
    const Vector hl = random_vector(d, rng);
    tta::EnsembleState ens{rng.normal(), rng.normal()};
    for (tta::LossMode mode : {tta::LossMode::Slw, tta::LossMode::EmOnly,
                               tta::LossMode::FaOnly, tta::LossMode::FixedHalf}) {
      const tta::ScalarLoss loss = tta::the_loss(yg, yl, hs, hg, hl, ens, mode);
      const Vector at = {ens.a_global, ens.a_local};
      const Vector grad = {loss.d_a_global, loss.d_a_local};
      worst = std::max(
          worst, gradient_check(
                     [&](const Vector& v) {
                       return tta::the_loss(yg, yl, hs, hg, hl,
                                            tta::EnsembleState{v[0], v[1]}, mode)
                           .value;
                     },
                     at, grad, 1e-5));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e", worst);
  return {"adaptation loss gradients (all modes)", worst < 1e-5, buf};
}

SelftestResult check_softmax_entropy() {
  RngStream rng(5150);
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 2 + rng.below(10);
    const Vector z = random_vector(C, rng, 5.0);
    const Vector p = nn::softmax(z);
    double total = 0.0;
    for (double v : p) {
      ok = ok && v > 0.0;
      total += v;
    }
    ok = ok && std::abs(total - 1.0) < 1e-12;
    Vector shifted = z;
    for (double& v : shifted) {
      v += 7.25;
    }
    const Vector p2 = nn::softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ok = ok && std::abs(p[i] - p2[i]) < 1e-9;
    }
    const double h = nn::shannon_entropy(z).value;
    ok = ok && h >= 0.0 && h <= std::log(static_cast<double>(C)) + 1e-12;
  }
  return {"softmax is a shift-invariant distribution; entropy in [0, log C]", ok, ""};
}

SelftestResult check_aggregation_oracle() {
  RngStream rng(99);
  fl::ServerState server;
  nn::RngStream init(1);
  server.extractor = nn::make_extractor({4, 5, 3}, init);
  server.global_head = nn::make_head(4, 3, init);
  std::vector<fl::LocalUpdate> updates;
  std::vector<double> weights;
  for (int k = 0; k < 5; ++k) {
    fl::LocalUpdate u;
    u.client_id = k;
    nn::RngStream r(100 + k);
    u.extractor = nn::make_extractor({4, 5, 3}, r);
    u.global_head = nn::make_head(4, 3, r);
    u.local_descriptor = random_vector(3, rng);
    u.num_samples = 1 + static_cast<std::int64_t>(rng.below(40));
    weights.push_back(static_cast<double>(u.num_samples));
    updates.push_back(u);
  }
  double total = 0.0;
  for (double w : weights) {
    total += w;
  }
  // Independent weighted-mean on the first extractor weight entry.
  double expect = 0.0;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    expect += weights[k] / total * updates[k].extractor.layers[0].weights.data[0];
  }
  fl::aggregate(server, updates);
  const double got = server.extractor.layers[0].weights.data[0];
  bool ok = std::abs(got - expect) < 1e-12;
  // And on the descriptor.
  double expect_d = 0.0;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    expect_d += weights[k] / total * updates[k].local_descriptor[1];
  }
  ok = ok && std::abs((*server.global_descriptor)[1] - expect_d) < 1e-12;
  return {"aggregation equals the weighted-mean oracle", ok, ""};
}

SelftestResult check_partition_properties() {
  data::GeneratorSpec spec =
      data::GeneratorSpec::make_random(6, 4, 1.0, 1.0, 0.5, 3);
  const data::LabeledSet set = data::generate_base(spec, 80);
  const data::PartitionResult part = data::dirichlet_partition(set, 5, 0.5, 42);
  std::vector<bool> seen(set.size(), false);
  bool ok = part.report.complete;
  std::size_t covered = 0;
  for (const auto& idx : part.client_indices) {
    for (std::size_t i : idx) {
      ok = ok && !seen[i];
      seen[i] = true;
      ++covered;
    }
  }
  ok = ok && covered == set.size();
  return {"dirichlet partition is disjoint and complete", ok, ""};
}

SelftestResult check_symmetry_fixed_point() {
  const Vector yg = {1.0, -0.5, 2.0};
  const Vector yl = yg;
  const Vector hs = {1.0, 0.0};
  const Vector hg = {0.0, 1.0};
  const Vector hl = {2.0, -1.0};
  // Equidistant descriptors: ||hs-hg|| = ||hs-hl|| = sqrt(2).
  tta::AdaptConfig config;
  const double e = tta::optimize_e(yg, yl, hs, hg, hl, config);
  const bool ok = std::abs(e - 0.5) < 1e-9;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "e* = %.12f", e);
  return {"symmetric inputs leave the ensemble weight at 0.5", ok, buf};
}

SelftestResult check_ema_closed_form() {
  tta::HistoryState history;
  const Vector target = {2.0, -1.0};
  tta::update_history(history, target, 0.1);
  Vector start = {0.0, 0.0};
  history.feature = start;
  const int n = 25;
  for (int i = 0; i < n; ++i) {
    tta::update_history(history, target, 0.1);
  }
  bool ok = true;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double expect =
        target[j] + (start[j] - target[j]) * std::pow(0.9, n);
    ok = ok && std::abs((*history.feature)[j] - expect) < 1e-12;
  }
  return {"history EMA matches its geometric closed form", ok, ""};
}

SelftestResult check_determinism() {
  auto build = [] {
    nn::RngStream rng(7);
    nn::Extractor e = nn::make_extractor({6, 8, 4}, rng);
    return nn::parameter_fingerprint(e);
  };
  const bool ok = build() == build();
  return {"identical seeds give bitwise-identical parameters", ok, ""};
}

}  // namespace

std::vector<SelftestResult> run_selftest_checks() {
  return {
      check_loss_gradients(),     check_ensemble_gradients(),
      check_softmax_entropy(),    check_aggregation_oracle(),
      check_partition_properties(), check_symmetry_fixed_point(),
      check_ema_closed_form(),    check_determinism(),
  };
}

bool selftest(std::ostream& out) {
  bool all_ok = true;
  for (const SelftestResult& r : run_selftest_checks()) {
    out << (r.passed ? "[ok]   " : "[FAIL] ") << r.name;
    if (!r.detail.empty()) {
      out << " (" << r.detail << ")";
    }
    out << "\n";
    all_ok = all_ok && r.passed;
  }
  out << (all_ok ? "selftest: all properties hold\n"
                 : "selftest: at least one property FAILED\n");
  return all_ok;
}

}  // namespace fedthe::harness
