#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fedthe/data/streams.hpp"
#include "fedthe/fl/checkpoint.hpp"
#include "fedthe/fl/runtime.hpp"
#include "fedthe/nn/losses.hpp"
#include "fedthe/nn/optim.hpp"
#include "oracles.hpp"

using namespace fedthe;
using namespace fedthe::fl;
using data::ClientBench;
using data::GeneratorSpec;
using data::LabeledSet;
using data::SplitFractions;
using data::StreamKind;
using nn::RngStream;
using nn::Vector;

namespace {

std::vector<ClientBench> toy_benches(int clients, std::uint64_t seed,
                                     double alpha = 1.0, int n_per_class = 40,
                                     int classes = 4) {
  const GeneratorSpec spec =
      GeneratorSpec::make_random(classes, 6, 1.2, 1.0, 0.5, seed);
  return data::build_benches(spec, n_per_class, clients, alpha, SplitFractions{}, 5,
                             seed);
}

TrainConfig toy_config() {
  TrainConfig config;
  config.rounds = 2;
  config.local_epochs = 2;
  config.batch_size = 16;
  config.seed = 5;
  return config;
}

double mean_train_loss(const Extractor& extractor, const Head& head,
                       const LabeledSet& train) {
  double acc = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Vector h = nn::forward_extract(extractor, train.input(i));
    acc += nn::cross_entropy(nn::forward_head(head, h), train.labels[i]).value;
  }
  return acc / static_cast<double>(train.size());
}

}  // namespace

TEST_CASE("local_train with zero lr returns the received parameters") {
  const auto benches = toy_benches(2, 3);
  TrainConfig config = toy_config();
  config.lr = 0.0;
  config.weight_decay = 0.0;
  RngStream init(1);
  const Extractor extractor = nn::make_extractor({6, 5, 4}, init);
  const Head head = nn::make_head(4, 4, init);
  RngStream rng(2);
  const LocalUpdate update = local_train(benches[0], extractor, head, config, rng);
  CHECK(nn::parameter_fingerprint(update.extractor) ==
        nn::parameter_fingerprint(extractor));
  CHECK(nn::parameter_fingerprint(update.global_head) ==
        nn::parameter_fingerprint(head));
  CHECK(update.num_samples == static_cast<std::int64_t>(benches[0].train.size()));
}

TEST_CASE("K=1 federated training equals centralized SGD under a shared schedule") {
  const auto benches = toy_benches(2, 11);
  // Single-client federation: keep only client 0.
  std::vector<ClientBench> single = {benches[0]};

  TrainConfig config;
  config.rounds = 3;
  config.local_epochs = 2;
  config.batch_size = 8;
  config.lr = 0.05;
  config.weight_decay = 5e-4;
  config.seed = 21;
  const ModelConfig mc{{6, 5, 4}, 4};

  const FederationResult fed = run_training(single, mc, config);

  // Centralized oracle: same init and batch schedule, direct SGD.
  RngStream init(derive_seed(config.seed, 0, 0, Phase::Init));
  Extractor extractor = nn::make_extractor(mc.extractor_dims, init);
  Head head = nn::make_head(mc.num_classes, extractor.feature_dim(), init);
  const LabeledSet& train = single[0].train;
  for (int round = 1; round <= config.rounds; ++round) {
    RngStream rng(derive_seed(config.seed, round, single[0].client_id,
                              Phase::LocalTrain));
    for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
      for (const auto& batch : epoch_batches(train.size(), config.batch_size, rng)) {
        nn::ExtractorGrads eg = nn::zero_grads(extractor);
        nn::HeadGrads hg = nn::zero_grads(head);
        for (std::size_t i : batch) {
          nn::ExtractorTrace trace;
          const Vector h = nn::forward_extract_traced(extractor, train.input(i), trace);
          const nn::LossGrad loss =
              nn::cross_entropy(nn::forward_head(head, h), train.labels[i]);
          const Vector dh = nn::backward_head(head, h, loss.dlogits, hg);
          nn::backward_extract(extractor, trace, dh, eg);
        }
        nn::scale_grads(eg, 1.0 / static_cast<double>(batch.size()));
        nn::scale_grads(hg, 1.0 / static_cast<double>(batch.size()));
        nn::sgd_step(extractor, eg, config.lr, config.weight_decay);
        nn::sgd_step(head, hg, config.lr, config.weight_decay);
      }
    }
  }

  for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
    for (std::size_t i = 0; i < extractor.layers[l].weights.data.size(); ++i) {
      CHECK(std::abs(fed.server.extractor.layers[l].weights.data[i] -
                     extractor.layers[l].weights.data[i]) < 1e-9);
    }
  }
  for (std::size_t i = 0; i < head.fc.weights.data.size(); ++i) {
    CHECK(std::abs(fed.server.global_head.fc.weights.data[i] -
                   head.fc.weights.data[i]) < 1e-9);
  }
}

TEST_CASE("training loss is non-increasing on a separable toy set") {
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.input_dim = 4;
  spec.within_class_std = 0.5;
  spec.seed = 9;
  spec.class_means = {Vector{4.0, 0.0, 0.0, 0.0}, Vector{-4.0, 0.0, 0.0, 0.0}};
  spec.natural_shift_delta = {Vector(4, 0.0), Vector(4, 0.0)};
  const auto benches = data::build_benches(spec, 40, 2, 10.0, SplitFractions{}, 5, 9);

  TrainConfig config;
  config.local_epochs = 1;
  config.batch_size = 1000;  // full batch
  config.lr = 0.005;
  config.weight_decay = 0.0;
  config.seed = 2;

  RngStream init(3);
  Extractor extractor = nn::make_extractor({4, 5, 3}, init);
  Head head = nn::make_head(2, 3, init);
  RngStream rng(4);
  double prev = mean_train_loss(extractor, head, benches[0].train);
  for (int step = 0; step < 25; ++step) {
    LocalUpdate update = local_train(benches[0], extractor, head, config, rng);
    extractor = std::move(update.extractor);
    head = std::move(update.global_head);
    const double cur = mean_train_loss(extractor, head, benches[0].train);
    CHECK(cur <= prev + 1e-9);
    prev = cur;
  }
}

TEST_CASE("train_personal_head leaves the extractor untouched") {
  const auto benches = toy_benches(2, 13);
  RngStream init(1);
  const Extractor extractor = nn::make_extractor({6, 5, 4}, init);
  Head personal = nn::make_head(4, 4, init);
  const auto fingerprint = nn::parameter_fingerprint(extractor);

  TrainConfig config = toy_config();
  RngStream rng(7);
  train_personal_head(personal, extractor, benches[0], config, rng);
  CHECK(nn::parameter_fingerprint(extractor) == fingerprint);

  // Zero epochs: head unchanged.
  Head before = personal;
  config.personalization_epochs = 0;
  RngStream rng2(8);
  train_personal_head(personal, extractor, benches[0], config, rng2);
  CHECK(nn::parameter_fingerprint(personal) == nn::parameter_fingerprint(before));
}

TEST_CASE("personal head overfits a two-class client") {
  // A client holding only classes {0, 1} funnels nearly all ID predictions
  // into those classes.
  const GeneratorSpec spec = GeneratorSpec::make_random(4, 6, 1.2, 1.0, 0.5, 31);
  const LabeledSet base = data::generate_base(spec, 60);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base.labels[i] <= 1) {
      keep.push_back(i);
    }
  }
  const LabeledSet biased = base.subset(keep);
  const auto split = data::split_client(
      [&] {
        std::vector<std::size_t> all(biased.size());
        for (std::size_t i = 0; i < all.size(); ++i) {
          all[i] = i;
        }
        return all;
      }(),
      SplitFractions{}, 3);

  ClientBench bench;
  bench.client_id = 0;
  bench.train = biased.subset(split.train);
  bench.test_streams[StreamKind::Id] = biased.subset(split.test);

  RngStream init(2);
  const Extractor extractor = nn::make_extractor({6, 8, 5}, init);
  Head personal = nn::make_head(4, 5, init);

  TrainConfig config;
  config.personalization_epochs = 30;
  config.batch_size = 16;
  config.lr = 0.05;
  config.seed = 1;
  RngStream rng(5);
  train_personal_head(personal, extractor, bench, config, rng);

  const LabeledSet& id_test = bench.stream(StreamKind::Id);
  int in_band = 0;
  for (std::size_t i = 0; i < id_test.size(); ++i) {
    const Vector h = nn::forward_extract(extractor, id_test.input(i));
    const Vector logits = nn::forward_head(personal, h);
    const int pred = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    in_band += pred <= 1;
  }
  CHECK(static_cast<double>(in_band) / static_cast<double>(id_test.size()) > 0.95);
}

TEST_CASE("compute_local_descriptor") {
  Extractor identity;
  identity.layers.push_back(nn::DenseLayer{});
  identity.layers[0].weights = nn::Matrix(2, 2);
  identity.layers[0].weights(0, 0) = 1.0;
  identity.layers[0].weights(1, 1) = 1.0;
  identity.layers[0].bias = {0.0, 0.0};

  LabeledSet set;
  set.num_classes = 2;
  set.append(Vector{0.0, 0.0}, 0, {});
  set.append(Vector{2.0, 2.0}, 1, {});
  const Vector mean = compute_local_descriptor(identity, set);
  CHECK(mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean[1] == doctest::Approx(1.0).epsilon(1e-12));

  LabeledSet one;
  one.num_classes = 2;
  one.append(Vector{3.0, -1.0}, 0, {});
  const Vector single = compute_local_descriptor(identity, one);
  CHECK(single[0] == 3.0);
  CHECK(single[1] == -1.0);

  // Brute-force mean oracle on a random extractor.
  RngStream rng(6);
  const Extractor e = nn::make_extractor({6, 4, 3}, rng);
  const auto benches = toy_benches(2, 41);
  const Vector got = compute_local_descriptor(e, benches[0].train);
  Vector expect(3, 0.0);
  for (std::size_t i = 0; i < benches[0].train.size(); ++i) {
    const Vector h = nn::forward_extract(e, benches[0].train.input(i));
    for (std::size_t d = 0; d < 3; ++d) {
      expect[d] += h[d];
    }
  }
  for (std::size_t d = 0; d < 3; ++d) {
    expect[d] /= static_cast<double>(benches[0].train.size());
    CHECK(got[d] == doctest::Approx(expect[d]).epsilon(1e-12));
  }

  LabeledSet empty;
  CHECK_THROWS_AS(compute_local_descriptor(e, empty), std::invalid_argument);
}

TEST_CASE("aggregate: identical returns reproduce the input") {
  RngStream init(4);
  ServerState server;
  server.extractor = nn::make_extractor({4, 3}, init);
  server.global_head = nn::make_head(3, 3, init);

  RngStream r(9);
  LocalUpdate u;
  u.client_id = 0;
  u.extractor = nn::make_extractor({4, 3}, r);
  u.global_head = nn::make_head(3, 3, r);
  u.local_descriptor = {1.0, 2.0, 3.0};
  u.num_samples = 10;
  LocalUpdate v = u;
  v.client_id = 1;
  v.num_samples = 25;

  aggregate(server, {u, v});
  CHECK(nn::parameter_fingerprint(server.extractor) ==
        nn::parameter_fingerprint(u.extractor));
  REQUIRE(server.global_descriptor.has_value());
  CHECK((*server.global_descriptor)[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(server.round == 1);
}

TEST_CASE("aggregate weights by data size over the sampled set") {
  // Scalar check: values (0, 4) with sizes (1, 3) average to 3.
  RngStream init(4);
  ServerState server;
  server.extractor = nn::make_extractor({1, 1}, init);
  server.global_head = nn::make_head(2, 1, init);

  auto scalar_update = [](int id, double value, std::int64_t n) {
    LocalUpdate u;
    u.client_id = id;
    u.extractor.layers.push_back(nn::DenseLayer{nn::Matrix(1, 1), Vector{value}});
    u.extractor.layers[0].weights(0, 0) = value;
    u.global_head.fc.weights = nn::Matrix(2, 1);
    u.global_head.fc.weights(0, 0) = value;
    u.global_head.fc.weights(1, 0) = value;
    u.global_head.fc.bias = {value, value};
    u.local_descriptor = {value};
    u.num_samples = n;
    return u;
  };
  aggregate(server, {scalar_update(0, 0.0, 1), scalar_update(1, 4.0, 3)});
  CHECK(server.extractor.layers[0].weights(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK((*server.global_descriptor)[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("aggregate matches the weighted-mean oracle on random inputs") {
  RngStream rng(77);
  ServerState server;
  RngStream init(1);
  server.extractor = nn::make_extractor({3, 4, 2}, init);
  server.global_head = nn::make_head(3, 2, init);

  std::vector<LocalUpdate> updates;
  for (int k = 0; k < 5; ++k) {
    LocalUpdate u;
    u.client_id = k;
    RngStream r(50 + k);
    u.extractor = nn::make_extractor({3, 4, 2}, r);
    u.global_head = nn::make_head(3, 2, r);
    u.local_descriptor = {r.normal(), r.normal()};
    u.num_samples = 1 + static_cast<std::int64_t>(rng.below(30));
    updates.push_back(u);
  }

  std::vector<double> weights;
  for (const auto& u : updates) {
    weights.push_back(static_cast<double>(u.num_samples));
  }

  ServerState result = server;
  aggregate(result, updates);
  for (std::size_t l = 0; l < server.extractor.layers.size(); ++l) {
    for (std::size_t i = 0; i < server.extractor.layers[l].weights.data.size(); ++i) {
      std::vector<double> values;
      for (const auto& u : updates) {
        values.push_back(u.extractor.layers[l].weights.data[i]);
      }
      CHECK(result.extractor.layers[l].weights.data[i] ==
            doctest::Approx(oracles::weighted_mean(values, weights)).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(aggregate(result, {}), std::invalid_argument);
}

TEST_CASE("run_training: T=0 returns the initial model") {
  const auto benches = toy_benches(2, 51);
  TrainConfig config = toy_config();
  config.rounds = 0;
  const ModelConfig mc{{6, 5, 4}, 4};
  const FederationResult fed = run_training(benches, mc, config);

  RngStream init(derive_seed(config.seed, 0, 0, Phase::Init));
  const Extractor expect_e = nn::make_extractor(mc.extractor_dims, init);
  const Head expect_h = nn::make_head(mc.num_classes, 4, init);
  CHECK(nn::parameter_fingerprint(fed.server.extractor) ==
        nn::parameter_fingerprint(expect_e));
  CHECK(nn::parameter_fingerprint(fed.server.global_head) ==
        nn::parameter_fingerprint(expect_h));
  CHECK_FALSE(fed.server.global_descriptor.has_value());
}

TEST_CASE("one round equals the weighted mean of the clients' returns") {
  const auto benches = toy_benches(2, 61);
  TrainConfig config = toy_config();
  config.rounds = 1;
  const ModelConfig mc{{6, 5, 4}, 4};
  const FederationResult fed = run_training(benches, mc, config);

  // Recompute both clients' local updates with the same broadcast and seeds.
  RngStream init(derive_seed(config.seed, 0, 0, Phase::Init));
  const Extractor e0 = nn::make_extractor(mc.extractor_dims, init);
  const Head h0 = nn::make_head(mc.num_classes, 4, init);
  std::vector<LocalUpdate> updates;
  for (const ClientBench& bench : benches) {
    RngStream rng(derive_seed(config.seed, 1, bench.client_id, Phase::LocalTrain));
    LocalUpdate u = local_train(bench, e0, h0, config, rng);
    u.local_descriptor = compute_local_descriptor(e0, bench.train);
    updates.push_back(std::move(u));
  }
  std::vector<double> weights;
  for (const auto& u : updates) {
    weights.push_back(static_cast<double>(u.num_samples));
  }
  for (std::size_t i = 0; i < e0.layers[0].weights.data.size(); ++i) {
    std::vector<double> values;
    for (const auto& u : updates) {
      values.push_back(u.extractor.layers[0].weights.data[i]);
    }
    CHECK(fed.server.extractor.layers[0].weights.data[i] ==
          doctest::Approx(oracles::weighted_mean(values, weights)).epsilon(1e-12));
  }
}

TEST_CASE("a round never touches a non-sampled client's state") {
  const auto benches = toy_benches(2, 71);
  TrainConfig config = toy_config();
  config.rounds = 1;
  config.participation_ratio = 0.5;  // exactly one sampled client
  const ModelConfig mc{{6, 5, 4}, 4};
  const FederationResult fed = run_training(benches, mc, config);

  RngStream init(derive_seed(config.seed, 0, 0, Phase::Init));
  nn::make_extractor(mc.extractor_dims, init);
  const Head initial_head = nn::make_head(mc.num_classes, 4, init);

  int untouched = 0;
  for (const ClientState& client : fed.clients) {
    if (!client.local_descriptor.has_value()) {
      CHECK(nn::parameter_fingerprint(client.personal_head) ==
            nn::parameter_fingerprint(initial_head));
      ++untouched;
    }
  }
  CHECK(untouched == 1);
}

TEST_CASE("run_training is deterministic") {
  const auto benches = toy_benches(3, 81);
  TrainConfig config = toy_config();
  const ModelConfig mc{{6, 5, 4}, 4};
  const FederationResult a = run_training(benches, mc, config);
  const FederationResult b = run_training(benches, mc, config);
  CHECK(nn::parameter_fingerprint(a.server.extractor) ==
        nn::parameter_fingerprint(b.server.extractor));
  CHECK(*a.server.global_descriptor == *b.server.global_descriptor);
  for (std::size_t k = 0; k < a.clients.size(); ++k) {
    CHECK(nn::parameter_fingerprint(a.clients[k].personal_head) ==
          nn::parameter_fingerprint(b.clients[k].personal_head));
  }
}

TEST_CASE("fedavg_ft") {
  const auto benches = toy_benches(2, 91);
  TrainConfig config = toy_config();
  const ModelConfig mc{{6, 5, 4}, 4};
  const FederationResult fed = run_training(benches, mc, config);

  SUBCASE("zero epochs returns the global model") {
    TrainConfig ft = config;
    ft.personalization_epochs = 0;
    const FineTunedModel model = fedavg_ft(fed.server, benches[0], ft);
    CHECK(nn::parameter_fingerprint(model.extractor) ==
          nn::parameter_fingerprint(fed.server.extractor));
    CHECK(nn::parameter_fingerprint(model.head) ==
          nn::parameter_fingerprint(fed.server.global_head));
  }

  SUBCASE("zero lr returns identical parameters") {
    TrainConfig ft = config;
    ft.lr = 0.0;
    ft.weight_decay = 0.0;
    const FineTunedModel model = fedavg_ft(fed.server, benches[0], ft);
    CHECK(nn::parameter_fingerprint(model.extractor) ==
          nn::parameter_fingerprint(fed.server.extractor));
  }

  SUBCASE("fine-tuning changes the model deterministically") {
    const FineTunedModel a = fedavg_ft(fed.server, benches[0], config);
    const FineTunedModel b = fedavg_ft(fed.server, benches[0], config);
    CHECK(nn::parameter_fingerprint(a.extractor) ==
          nn::parameter_fingerprint(b.extractor));
    CHECK(nn::parameter_fingerprint(a.extractor) !=
          nn::parameter_fingerprint(fed.server.extractor));
  }
}

TEST_CASE("checkpoint round-trips bitwise") {
  const auto benches = toy_benches(2, 101);
  TrainConfig config = toy_config();
  const ModelConfig mc{{6, 5, 4}, 4};
  const FederationResult fed = run_training(benches, mc, config);

  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "fedthe_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, fed.server, fed.clients);
  const Checkpoint loaded = load_checkpoint(dir);

  CHECK(loaded.server.round == fed.server.round);
  CHECK(nn::parameter_fingerprint(loaded.server.extractor) ==
        nn::parameter_fingerprint(fed.server.extractor));
  CHECK(nn::parameter_fingerprint(loaded.server.global_head) ==
        nn::parameter_fingerprint(fed.server.global_head));
  CHECK(*loaded.server.global_descriptor == *fed.server.global_descriptor);
  REQUIRE(loaded.clients.size() == fed.clients.size());
  for (std::size_t k = 0; k < fed.clients.size(); ++k) {
    CHECK(loaded.clients[k].client_id == fed.clients[k].client_id);
    CHECK(nn::parameter_fingerprint(loaded.clients[k].personal_head) ==
          nn::parameter_fingerprint(fed.clients[k].personal_head));
    CHECK(*loaded.clients[k].local_descriptor == *fed.clients[k].local_descriptor);
  }
  std::filesystem::remove_all(dir);
}
