#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "fedthe/data/dataset.hpp"
#include "fedthe/data/partition.hpp"

namespace fedthe::data {

/// One client's training data plus its labeled evaluation streams.
struct ClientBench {
  int client_id = -1;
  LabeledSet train;
  LabeledSet val;
  std::map<StreamKind, LabeledSet> test_streams;

  const LabeledSet& stream(StreamKind kind) const;
};

/// Fills every non-ID stream of each draft bench. On entry each draft must
/// hold train/val and its ID test stream; requires at least two clients for
/// the out-of-client streams.
void build_streams(std::vector<ClientBench>& drafts, const GeneratorSpec& spec,
                   int severity, std::uint64_t seed);

/// Full pipeline: generate the base set, Dirichlet-partition it, split each
/// client, and build all test streams.
std::vector<ClientBench> build_benches(const GeneratorSpec& spec, int n_per_class,
                                       int num_clients, double alpha,
                                       SplitFractions fractions, int severity,
                                       std::uint64_t seed);

}  // namespace fedthe::data
