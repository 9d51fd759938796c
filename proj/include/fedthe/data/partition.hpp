#pragma once

#include <cstdint>
#include <vector>

#include "fedthe/data/dataset.hpp"

namespace fedthe::data {

struct PartitionReport {
  std::vector<std::vector<std::int64_t>> class_histograms;  // per client
  double alpha = 0.0;
  bool complete = false;  // union of clients covers the dataset, disjointly
};

struct PartitionResult {
  std::vector<std::vector<std::size_t>> client_indices;
  PartitionReport report;
};

/// Per class, splits the sample indices across clients with proportions drawn
/// from Dir(alpha). Proportions are resampled until every client holds at
/// least num_classes + 2 samples.
PartitionResult dirichlet_partition(const LabeledSet& data, int num_clients,
                                    double alpha, std::uint64_t seed);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct ClientSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Disjoint uniform random split of a client's indices.
ClientSplit split_client(const std::vector<std::size_t>& indices,
                         SplitFractions fractions, std::uint64_t seed);

}  // namespace fedthe::data
