#include "fedthe/fl/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedthe/nn/losses.hpp"
#include "fedthe/nn/optim.hpp"

namespace fedthe::fl {

using data::LabeledSet;
using nn::ExtractorGrads;
using nn::ExtractorTrace;
using nn::HeadGrads;
using nn::LossGrad;

void TrainConfig::validate() const {
  if (rounds < 0) {
    throw std::invalid_argument("TrainConfig: rounds must be >= 0");
  }
  if (participation_ratio <= 0.0 || participation_ratio > 1.0) {
    throw std::invalid_argument("TrainConfig: participation ratio must be in (0, 1]");
  }
  if (local_epochs < 1 || personalization_epochs < 0) {
    throw std::invalid_argument("TrainConfig: bad epoch counts");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
}

std::uint64_t derive_seed(std::uint64_t base, int round, int client_id, Phase phase) {
  std::uint64_t s = nn::mix_seed(base, static_cast<std::uint64_t>(phase));
  s = nn::mix_seed(s, static_cast<std::uint64_t>(round) + 1);
  return nn::mix_seed(s, static_cast<std::uint64_t>(client_id) + 1);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                    RngStream& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

namespace {

LossGrad sample_loss(std::span<const double> logits, int label,
                     const TrainConfig& config,
                     std::span<const std::int64_t> counts) {
  if (config.balanced_softmax) {
    return nn::balanced_cross_entropy(logits, label, counts);
  }
  return nn::cross_entropy(logits, label);
}

/// Class counts clamped to one so balanced softmax stays defined on clients
/// that lack some classes entirely.
std::vector<std::int64_t> clamped_counts(const LabeledSet& train) {
  std::vector<std::int64_t> counts = train.class_counts();
  for (std::int64_t& c : counts) {
    c = std::max<std::int64_t>(c, 1);
  }
  return counts;
}

}  // namespace

LocalUpdate local_train(const ClientBench& bench, Extractor extractor, Head global_head,
                        const TrainConfig& config, RngStream& rng) {
  config.validate();
  if (bench.train.size() == 0) {
    throw std::invalid_argument("local_train: empty train split");
  }
  const std::vector<std::int64_t> counts = clamped_counts(bench.train);
  for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
    for (const auto& batch : epoch_batches(bench.train.size(), config.batch_size, rng)) {
      ExtractorGrads eg = nn::zero_grads(extractor);
      HeadGrads hg = nn::zero_grads(global_head);
      for (std::size_t i : batch) {
        ExtractorTrace trace;
        const Vector h = nn::forward_extract_traced(extractor, bench.train.input(i), trace);
        const Vector logits = nn::forward_head(global_head, h);
        const LossGrad loss = sample_loss(logits, bench.train.labels[i], config, counts);
        const Vector dh = nn::backward_head(global_head, h, loss.dlogits, hg);
        nn::backward_extract(extractor, trace, dh, eg);
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      nn::scale_grads(eg, inv);
      nn::scale_grads(hg, inv);
      nn::sgd_step(extractor, eg, config.lr, config.weight_decay);
      nn::sgd_step(global_head, hg, config.lr, config.weight_decay);
    }
  }
  LocalUpdate update;
  update.client_id = bench.client_id;
  update.extractor = std::move(extractor);
  update.global_head = std::move(global_head);
  update.num_samples = static_cast<std::int64_t>(bench.train.size());
  return update;
}

void train_personal_head(Head& personal_head, const Extractor& frozen_extractor,
                         const ClientBench& bench, const TrainConfig& config,
                         RngStream& rng) {
  config.validate();
  if (bench.train.size() == 0) {
    throw std::invalid_argument("train_personal_head: empty train split");
  }
  const std::vector<std::int64_t> counts = clamped_counts(bench.train);
  // Features are fixed while the extractor is frozen; compute them once.
  std::vector<Vector> features;
  features.reserve(bench.train.size());
  for (std::size_t i = 0; i < bench.train.size(); ++i) {
    features.push_back(nn::forward_extract(frozen_extractor, bench.train.input(i)));
  }
  for (int epoch = 0; epoch < config.personalization_epochs; ++epoch) {
    for (const auto& batch : epoch_batches(bench.train.size(), config.batch_size, rng)) {
      HeadGrads hg = nn::zero_grads(personal_head);
      for (std::size_t i : batch) {
        const Vector logits = nn::forward_head(personal_head, features[i]);
        const LossGrad loss = sample_loss(logits, bench.train.labels[i], config, counts);
        nn::backward_head(personal_head, features[i], loss.dlogits, hg);
      }
      nn::scale_grads(hg, 1.0 / static_cast<double>(batch.size()));
      nn::sgd_step(personal_head, hg, config.lr, config.weight_decay);
    }
  }
}

Vector compute_local_descriptor(const Extractor& extractor, const LabeledSet& train) {
  if (train.size() == 0) {
    throw std::invalid_argument("compute_local_descriptor: empty split");
  }
  Vector mean(extractor.feature_dim(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    nn::axpy(mean, nn::forward_extract(extractor, train.input(i)));
  }
  for (double& v : mean) {
    v /= static_cast<double>(train.size());
  }
  return mean;
}

void aggregate(ServerState& server, std::vector<LocalUpdate> updates) {
  if (updates.empty()) {
    throw std::invalid_argument("aggregate: no returning clients");
  }
  std::sort(updates.begin(), updates.end(),
            [](const LocalUpdate& a, const LocalUpdate& b) {
              return a.client_id < b.client_id;
            });
  double total = 0.0;
  for (const LocalUpdate& u : updates) {
    total += static_cast<double>(u.num_samples);
  }

  auto blend_layer = [](nn::DenseLayer& acc, const nn::DenseLayer& in, double w) {
    if (!acc.weights.same_shape(in.weights) || acc.bias.size() != in.bias.size()) {
      throw std::invalid_argument("aggregate: mismatched parameter shapes");
    }
    for (std::size_t i = 0; i < acc.weights.data.size(); ++i) {
      acc.weights.data[i] += w * in.weights.data[i];
    }
    for (std::size_t i = 0; i < acc.bias.size(); ++i) {
      acc.bias[i] += w * in.bias[i];
    }
  };

  Extractor extractor = server.extractor;
  Head global_head = server.global_head;
  for (nn::DenseLayer& layer : extractor.layers) {
    std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  std::fill(global_head.fc.weights.data.begin(), global_head.fc.weights.data.end(), 0.0);
  std::fill(global_head.fc.bias.begin(), global_head.fc.bias.end(), 0.0);
  Vector descriptor(server.extractor.feature_dim(), 0.0);

  for (const LocalUpdate& u : updates) {
    const double w = static_cast<double>(u.num_samples) / total;
    if (u.extractor.layers.size() != extractor.layers.size()) {
      throw std::invalid_argument("aggregate: extractor layer count mismatch");
    }
    for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
      blend_layer(extractor.layers[l], u.extractor.layers[l], w);
    }
    blend_layer(global_head.fc, u.global_head.fc, w);
    if (u.local_descriptor.size() != descriptor.size()) {
      throw std::invalid_argument("aggregate: descriptor dim mismatch");
    }
    nn::axpy(descriptor, u.local_descriptor, w);
  }

  server.extractor = std::move(extractor);
  server.global_head = std::move(global_head);
  server.global_descriptor = std::move(descriptor);
  server.round += 1;
}

FederationResult run_training(const std::vector<ClientBench>& benches,
                              const ModelConfig& model_config,
                              const TrainConfig& config) {
  config.validate();
  if (benches.empty()) {
    throw std::invalid_argument("run_training: need at least one client");
  }
  const int K = static_cast<int>(benches.size());

  FederationResult result;
  {
    RngStream init_rng(derive_seed(config.seed, 0, 0, Phase::Init));
    result.server.extractor = nn::make_extractor(model_config.extractor_dims, init_rng);
    result.server.global_head = nn::make_head(
        model_config.num_classes, result.server.extractor.feature_dim(), init_rng);
  }
  for (int k = 0; k < K; ++k) {
    ClientState state;
    state.client_id = benches[k].client_id;
    state.personal_head = result.server.global_head;
    result.clients.push_back(std::move(state));
  }

  const int sampled_per_round = std::max(
      1, static_cast<int>(std::ceil(config.participation_ratio * K)));

  for (int round = 1; round <= config.rounds; ++round) {
    RngStream sampling_rng(derive_seed(config.seed, round, 0, Phase::Sampling));
    std::vector<std::size_t> sampled = sampling_rng.sample_without_replacement(
        static_cast<std::size_t>(K), static_cast<std::size_t>(sampled_per_round));
    std::sort(sampled.begin(), sampled.end());

    std::vector<LocalUpdate> updates;
    for (std::size_t k : sampled) {
      const ClientBench& bench = benches[k];
      ClientState& client = result.clients[k];

      // Broadcast: every sampled client receives identical copies.
      RngStream train_rng(
          derive_seed(config.seed, round, client.client_id, Phase::LocalTrain));
      LocalUpdate update = local_train(bench, result.server.extractor,
                                       result.server.global_head, config, train_rng);

      if (config.reinit_personal_head) {
        client.personal_head = result.server.global_head;
      }
      RngStream personal_rng(
          derive_seed(config.seed, round, client.client_id, Phase::Personalize));
      train_personal_head(client.personal_head, result.server.extractor, bench,
                          config, personal_rng);

      client.local_descriptor =
          compute_local_descriptor(result.server.extractor, bench.train);
      update.local_descriptor = *client.local_descriptor;
      updates.push_back(std::move(update));
    }
    aggregate(result.server, std::move(updates));
  }
  return result;
}

FineTunedModel fedavg_ft(const ServerState& server, const ClientBench& bench,
                         const TrainConfig& config) {
  config.validate();
  if (bench.train.size() == 0) {
    throw std::invalid_argument("fedavg_ft: empty train split");
  }
  FineTunedModel model{server.extractor, server.global_head};
  const std::vector<std::int64_t> counts = clamped_counts(bench.train);
  RngStream rng(derive_seed(config.seed, server.round + 1, bench.client_id,
                            Phase::FineTune));
  for (int epoch = 0; epoch < config.personalization_epochs; ++epoch) {
    for (const auto& batch : epoch_batches(bench.train.size(), config.batch_size, rng)) {
      ExtractorGrads eg = nn::zero_grads(model.extractor);
      HeadGrads hg = nn::zero_grads(model.head);
      for (std::size_t i : batch) {
        ExtractorTrace trace;
        const Vector h =
            nn::forward_extract_traced(model.extractor, bench.train.input(i), trace);
        const Vector logits = nn::forward_head(model.head, h);
        const LossGrad loss = sample_loss(logits, bench.train.labels[i], config, counts);
        const Vector dh = nn::backward_head(model.head, h, loss.dlogits, hg);
        nn::backward_extract(model.extractor, trace, dh, eg);
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      nn::scale_grads(eg, inv);
      nn::scale_grads(hg, inv);
      nn::sgd_step(model.extractor, eg, config.lr, config.weight_decay);
      nn::sgd_step(model.head, hg, config.lr, config.weight_decay);
    }
  }
  return model;
}

}  // namespace fedthe::fl
