#include "fedthe/data/streams.hpp"

#include <algorithm>
#include <stdexcept>

#include "fedthe/data/corrupt.hpp"
#include "fedthe/nn/rng.hpp"

namespace fedthe::data {

using nn::RngStream;

const LabeledSet& ClientBench::stream(StreamKind kind) const {
  auto it = test_streams.find(kind);
  if (it == test_streams.end()) {
    throw std::invalid_argument("ClientBench: stream not built: " + to_string(kind));
  }
  return it->second;
}

namespace {

LabeledSet corrupt_set(const LabeledSet& src, StreamKind origin, int severity,
                       double sigma_data, RngStream& rng) {
  LabeledSet out;
  out.num_classes = src.num_classes;
  out.reserve(src.size(), src.dim());
  out.inputs.cols = src.dim();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto kind = static_cast<CorruptionKind>(rng.below(kNumCorruptionKinds));
    Vector x = corrupt(src.input(i), kind, severity, sigma_data, rng);
    Provenance prov = src.provenance[i];
    prov.origin = origin;
    prov.corruption = static_cast<int>(kind);
    out.append(x, src.labels[i], prov);
  }
  return out;
}

LabeledSet natural_shift_stream(const ClientBench& bench, const GeneratorSpec& spec,
                                std::uint64_t seed) {
  // Same size as the ID test stream, class histogram matching the client's
  // training distribution up to rounding (largest remainder).
  const std::vector<std::int64_t> train_counts = bench.train.class_counts();
  const auto n_train = static_cast<double>(bench.train.size());
  const auto n_target = static_cast<std::int64_t>(bench.stream(StreamKind::Id).size());

  std::vector<std::int64_t> counts(spec.num_classes, 0);
  std::vector<std::pair<double, int>> remainders;
  std::int64_t assigned = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    const double ideal =
        static_cast<double>(train_counts[c]) / n_train * static_cast<double>(n_target);
    counts[c] = static_cast<std::int64_t>(ideal);
    assigned += counts[c];
    remainders.emplace_back(ideal - static_cast<double>(counts[c]), c);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::int64_t r = 0; r < n_target - assigned; ++r) {
    counts[remainders[static_cast<std::size_t>(r) % remainders.size()].second] += 1;
  }

  LabeledSet out = generate_shifted(spec, counts, seed);
  for (Provenance& prov : out.provenance) {
    prov.source_client = bench.client_id;
  }
  return out;
}

}  // namespace

void build_streams(std::vector<ClientBench>& drafts, const GeneratorSpec& spec,
                   int severity, std::uint64_t seed) {
  if (drafts.size() < 2) {
    throw std::invalid_argument(
        "build_streams: out-of-client streams need at least two clients");
  }
  for (ClientBench& bench : drafts) {
    if (bench.test_streams.find(StreamKind::Id) == bench.test_streams.end() ||
        bench.stream(StreamKind::Id).size() == 0 || bench.train.size() == 0) {
      throw std::invalid_argument("build_streams: draft bench incomplete");
    }
  }

  for (ClientBench& bench : drafts) {
    const std::uint64_t client_seed =
        nn::mix_seed(seed, 0x73747265616dULL + static_cast<std::uint64_t>(bench.client_id));
    const LabeledSet& id_stream = bench.stream(StreamKind::Id);

    {
      RngStream rng(nn::mix_seed(client_seed, 1));
      bench.test_streams[StreamKind::Corrupted] =
          corrupt_set(id_stream, StreamKind::Corrupted, severity,
                      spec.within_class_std, rng);
    }

    bench.test_streams[StreamKind::NaturalShift] =
        natural_shift_stream(bench, spec, nn::mix_seed(client_seed, 2));

    {
      // Uniform draws over the pooled ID test samples of the other clients.
      RngStream rng(nn::mix_seed(client_seed, 3));
      LabeledSet ooc;
      ooc.num_classes = spec.num_classes;
      ooc.reserve(id_stream.size(), id_stream.dim());
      ooc.inputs.cols = id_stream.dim();
      std::vector<std::pair<const LabeledSet*, std::size_t>> pool;
      for (const ClientBench& other : drafts) {
        if (other.client_id == bench.client_id) {
          continue;
        }
        const LabeledSet& other_id = other.stream(StreamKind::Id);
        for (std::size_t i = 0; i < other_id.size(); ++i) {
          pool.emplace_back(&other_id, i);
        }
      }
      for (std::size_t n = 0; n < id_stream.size(); ++n) {
        const auto& [set, i] = pool[rng.below(pool.size())];
        Provenance prov = set->provenance[i];
        prov.origin = StreamKind::OutOfClient;
        ooc.append(set->input(i), set->labels[i], prov);
      }
      bench.test_streams[StreamKind::OutOfClient] = std::move(ooc);
    }

    {
      RngStream rng(nn::mix_seed(client_seed, 4));
      bench.test_streams[StreamKind::CorruptedOutOfClient] =
          corrupt_set(bench.stream(StreamKind::OutOfClient),
                      StreamKind::CorruptedOutOfClient, severity,
                      spec.within_class_std, rng);
    }

    {
      // One copy of each of the four single-shift streams, order shuffled.
      RngStream rng(nn::mix_seed(client_seed, 5));
      const StreamKind parts[] = {StreamKind::Id, StreamKind::Corrupted,
                                  StreamKind::NaturalShift, StreamKind::OutOfClient};
      std::vector<std::pair<StreamKind, std::size_t>> order;
      for (StreamKind part : parts) {
        for (std::size_t i = 0; i < bench.stream(part).size(); ++i) {
          order.emplace_back(part, i);
        }
      }
      rng.shuffle(order);
      LabeledSet mixture;
      mixture.num_classes = spec.num_classes;
      mixture.reserve(order.size(), id_stream.dim());
      mixture.inputs.cols = id_stream.dim();
      for (const auto& [part, i] : order) {
        const LabeledSet& src = bench.stream(part);
        mixture.append(src.input(i), src.labels[i], src.provenance[i]);
      }
      bench.test_streams[StreamKind::Mixture] = std::move(mixture);
    }
  }
}

std::vector<ClientBench> build_benches(const GeneratorSpec& spec, int n_per_class,
                                       int num_clients, double alpha,
                                       SplitFractions fractions, int severity,
                                       std::uint64_t seed) {
  const LabeledSet base = generate_base(spec, n_per_class);
  const PartitionResult partition =
      dirichlet_partition(base, num_clients, alpha, nn::mix_seed(seed, 11));

  std::vector<ClientBench> benches(num_clients);
  for (int k = 0; k < num_clients; ++k) {
    ClientBench& bench = benches[k];
    bench.client_id = k;
    const ClientSplit split =
        split_client(partition.client_indices[k], fractions,
                     nn::mix_seed(seed, 100 + static_cast<std::uint64_t>(k)));
    bench.train = base.subset(split.train);
    bench.val = base.subset(split.val);
    LabeledSet id_test = base.subset(split.test);
    for (LabeledSet* set : {&bench.train, &bench.val, &id_test}) {
      for (Provenance& prov : set->provenance) {
        prov.source_client = k;
      }
    }
    bench.test_streams[StreamKind::Id] = std::move(id_test);
  }
  build_streams(benches, spec, severity, nn::mix_seed(seed, 12));
  return benches;
}

}  // namespace fedthe::data
