#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedthe/data/streams.hpp"
#include "fedthe/fl/config.hpp"
#include "fedthe/nn/model.hpp"
#include "fedthe/nn/rng.hpp"

namespace fedthe::fl {

using data::ClientBench;
using nn::Extractor;
using nn::Head;
using nn::RngStream;
using nn::Vector;

struct ServerState {
  Extractor extractor;
  Head global_head;
  /// Aggregate of the clients' local descriptors; absent before round 1.
  std::optional<Vector> global_descriptor;
  int round = 0;
};

struct ClientState {
  int client_id = -1;
  Head personal_head;
  /// Mean training feature under the extractor received in the client's last
  /// participating round; absent until then.
  std::optional<Vector> local_descriptor;
};

/// What a sampled client sends back to the server.
struct LocalUpdate {
  int client_id = -1;
  Extractor extractor;
  Head global_head;
  Vector local_descriptor;
  std::int64_t num_samples = 0;
};

/// Seed scoping for everything the runtime randomizes; exposed so oracles can
/// reproduce the exact batch schedule.
enum class Phase : std::uint64_t {
  Init = 1,
  Sampling = 2,
  LocalTrain = 3,
  Personalize = 4,
  FineTune = 5,
};
std::uint64_t derive_seed(std::uint64_t base, int round, int client_id, Phase phase);

/// Shuffled minibatch index schedule for one epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                    RngStream& rng);

/// Mini-batch SGD over the client's train split for local_epochs; returns the
/// trained copies of the received extractor and global head. The client's own
/// personalized head is untouched.
LocalUpdate local_train(const ClientBench& bench, Extractor extractor, Head global_head,
                        const TrainConfig& config, RngStream& rng);

/// Trains only the personalized head, with gradients flowing through the head
/// alone; the extractor stays frozen and unadapted.
void train_personal_head(Head& personal_head, const Extractor& frozen_extractor,
                         const ClientBench& bench, const TrainConfig& config,
                         RngStream& rng);

/// Mean feature of the training split under the given extractor.
Vector compute_local_descriptor(const Extractor& extractor,
                                const data::LabeledSet& train);

/// Data-size-weighted mean of all returned parameters and descriptors, with
/// weights over the sampled set only. Updates are reduced in ascending
/// client_id order.
void aggregate(ServerState& server, std::vector<LocalUpdate> updates);

struct FederationResult {
  ServerState server;
  std::vector<ClientState> clients;
};

/// Runs the two-head federated training loop for config.rounds rounds.
FederationResult run_training(const std::vector<ClientBench>& benches,
                              const ModelConfig& model_config,
                              const TrainConfig& config);

/// Full model fine-tuned end-to-end on one client's training split; the
/// baseline personalized model and the base model for test-time tuning of it.
struct FineTunedModel {
  Extractor extractor;
  Head head;
};

FineTunedModel fedavg_ft(const ServerState& server, const ClientBench& bench,
                         const TrainConfig& config);

}  // namespace fedthe::fl
