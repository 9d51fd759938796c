#include "fedthe/data/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedthe/nn/rng.hpp"

namespace fedthe::data {

using nn::RngStream;

namespace {

/// Largest-remainder apportionment of `total` items into shares `props`.
std::vector<std::int64_t> apportion(const std::vector<double>& props,
                                    std::int64_t total) {
  const std::size_t k = props.size();
  std::vector<std::int64_t> counts(k, 0);
  std::vector<std::pair<double, std::size_t>> remainders(k);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double ideal = props[i] * static_cast<double>(total);
    counts[i] = static_cast<std::int64_t>(std::floor(ideal));
    assigned += counts[i];
    remainders[i] = {ideal - std::floor(ideal), i};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // deterministic tie-break
  });
  for (std::int64_t r = 0; r < total - assigned; ++r) {
    counts[remainders[static_cast<std::size_t>(r) % k].second] += 1;
  }
  return counts;
}

}  // namespace

PartitionResult dirichlet_partition(const LabeledSet& data, int num_clients,
                                    double alpha, std::uint64_t seed) {
  if (num_clients < 1) {
    throw std::invalid_argument("dirichlet_partition: need at least one client");
  }
  if (alpha <= 0.0) {
    throw std::invalid_argument("dirichlet_partition: alpha must be positive");
  }
  const int C = data.num_classes;
  const std::int64_t min_per_client = C + 2;
  if (static_cast<std::int64_t>(data.size()) <
      min_per_client * static_cast<std::int64_t>(num_clients)) {
    throw std::invalid_argument(
        "dirichlet_partition: dataset too small for the per-client minimum of " +
        std::to_string(min_per_client));
  }

  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[data.labels[i]].push_back(i);
  }

  RngStream rng(nn::mix_seed(seed, 0x706172ULL));  // "par"
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> clients(num_clients);
    for (int c = 0; c < C; ++c) {
      std::vector<std::size_t> pool = by_class[c];
      rng.shuffle(pool);
      const std::vector<double> props =
          rng.dirichlet(alpha, static_cast<std::size_t>(num_clients));
      const std::vector<std::int64_t> counts =
          apportion(props, static_cast<std::int64_t>(pool.size()));
      std::size_t offset = 0;
      for (int k = 0; k < num_clients; ++k) {
        for (std::int64_t j = 0; j < counts[k]; ++j) {
          clients[k].push_back(pool[offset++]);
        }
      }
    }
    const bool feasible = std::all_of(
        clients.begin(), clients.end(), [&](const std::vector<std::size_t>& idx) {
          return static_cast<std::int64_t>(idx.size()) >= min_per_client;
        });
    if (!feasible) {
      continue;
    }
    PartitionResult result;
    result.client_indices = std::move(clients);
    result.report.alpha = alpha;
    result.report.class_histograms.resize(num_clients,
                                          std::vector<std::int64_t>(C, 0));
    std::size_t covered = 0;
    for (int k = 0; k < num_clients; ++k) {
      for (std::size_t i : result.client_indices[k]) {
        result.report.class_histograms[k][data.labels[i]] += 1;
      }
      covered += result.client_indices[k].size();
    }
    result.report.complete = covered == data.size();
    return result;
  }
  throw std::invalid_argument(
      "dirichlet_partition: could not satisfy the per-client minimum; "
      "dataset too small for this alpha/client combination");
}

ClientSplit split_client(const std::vector<std::size_t>& indices,
                         SplitFractions fractions, std::uint64_t seed) {
  if (fractions.train <= 0.0 || fractions.val <= 0.0 || fractions.test <= 0.0) {
    throw std::invalid_argument("split_client: all fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split_client: fractions must sum to 1");
  }
  if (indices.size() < 3) {
    throw std::invalid_argument("split_client: need at least 3 samples");
  }
  std::vector<std::size_t> shuffled = indices;
  RngStream rng(nn::mix_seed(seed, 0x73706c6974ULL));  // "split"
  rng.shuffle(shuffled);

  const std::size_t n = shuffled.size();
  std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(n))));
  std::size_t n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n))));
  if (n_val + n_test >= n) {
    throw std::invalid_argument("split_client: subset too small for the fractions");
  }
  const std::size_t n_train = n - n_val - n_test;

  ClientSplit split;
  split.train.assign(shuffled.begin(), shuffled.begin() + n_train);
  split.val.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
  split.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
  return split;
}

}  // namespace fedthe::data
