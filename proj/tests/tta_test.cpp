#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedthe/data/streams.hpp"
#include "fedthe/fl/runtime.hpp"
#include "fedthe/nn/losses.hpp"
#include "fedthe/nn/optim.hpp"
#include "fedthe/tta/adapt.hpp"
#include "fedthe/tta/ensemble.hpp"
#include "fedthe/tta/predict.hpp"
#include "oracles.hpp"

using namespace fedthe;
using namespace fedthe::tta;
using data::GeneratorSpec;
using data::StreamKind;
using nn::RngStream;
using nn::Vector;

namespace {

Vector random_vector(std::size_t n, RngStream& rng, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) {
    x = rng.normal(0.0, scale);
  }
  return v;
}

struct TrainedSetup {
  std::vector<data::ClientBench> benches;
  fl::FederationResult fed;
  fl::FineTunedModel ft;
  double sigma_data = 1.0;

  EvalContext context(const AdaptConfig& adapt, std::uint64_t seed = 500) const {
    return make_eval_context(fed.server, fed.clients[0], &ft, adapt, sigma_data, seed);
  }
};

TrainedSetup trained_setup(std::uint64_t seed = 17) {
  TrainedSetup s;
  const GeneratorSpec spec = GeneratorSpec::make_random(4, 6, 1.0, 1.0, 0.5, seed);
  s.benches = data::build_benches(spec, 50, 2, 0.5, data::SplitFractions{}, 5, seed);
  fl::TrainConfig config;
  config.rounds = 3;
  config.local_epochs = 2;
  config.batch_size = 16;
  config.seed = seed;
  s.fed = fl::run_training(s.benches, fl::ModelConfig{{6, 8, 5}, 4}, config);
  s.ft = fl::fedavg_ft(s.fed.server, s.benches[0], config);
  return s;
}

}  // namespace

TEST_CASE("ensemble_logits") {
  const Vector yg = {2.0, 0.0};
  const Vector yl = {0.0, 2.0};
  CHECK(ensemble_logits(yg, yl, 1.0) == yg);
  const Vector mid = ensemble_logits(yg, yl, 0.5);
  CHECK(mid[0] == doctest::Approx(1.0));
  CHECK(mid[1] == doctest::Approx(1.0));
  CHECK(ensemble_logits(yg, yl, 0.0) == yl);
  CHECK_THROWS_AS(ensemble_logits(yg, Vector{1.0}, 0.5), std::invalid_argument);
}

TEST_CASE("EnsembleState parameterization") {
  EnsembleState zero;
  CHECK(zero.e() == doctest::Approx(0.5).epsilon(1e-15));
  EnsembleState skew{50.0, -50.0};
  CHECK(skew.e() > 0.0);
  CHECK(skew.e() <= 1.0);
  EnsembleState skew2{-50.0, 50.0};
  CHECK(skew2.e() > 0.0);
  CHECK(skew2.e() < 1e-12);
}

TEST_CASE("em_loss") {
  const Vector same = {1.0, -2.0, 0.5};
  EnsembleState ens{0.3, -0.4};
  const ScalarLoss l = em_loss(same, same, ens);
  CHECK(l.d_a_global == 0.0);
  CHECK(l.d_a_local == 0.0);

  // Uniform ensembled logits over C classes.
  const Vector zeros(6, 0.0);
  CHECK(em_loss(zeros, zeros, ens).value ==
        doctest::Approx(std::log(6.0)).epsilon(1e-12));

  RngStream rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t C = 3 + rng.below(6);
    const Vector yg = random_vector(C, rng, 2.0);
    const Vector yl = random_vector(C, rng, 2.0);
    EnsembleState e{rng.normal(), rng.normal()};
    const ScalarLoss loss = em_loss(yg, yl, e);
    const double err = oracles::finite_difference_error(
        [&](const Vector& v) { return em_loss(yg, yl, EnsembleState{v[0], v[1]}).value; },
        Vector{e.a_global, e.a_local}, Vector{loss.d_a_global, loss.d_a_local}, 1e-5);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("smooth_feature") {
  HistoryState history;
  const Vector first = {2.0, 3.0};
  // First-sample rule: unsmoothed, seeds the history.
  const Vector out = smooth_feature(first, history, 0.1);
  CHECK(out == first);
  REQUIRE(history.feature.has_value());
  CHECK(*history.feature == first);

  history.feature = Vector{0.0, 0.0};
  const Vector smoothed = smooth_feature(Vector{10.0, 0.0}, history, 0.1);
  CHECK(smoothed[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(smoothed[1] == doctest::Approx(0.0).epsilon(1e-12));

  history.feature = Vector{5.0, -1.0};
  const Vector beta_one = smooth_feature(Vector{7.0, 2.0}, history, 1.0);
  CHECK(beta_one[0] == doctest::Approx(7.0));
  CHECK(beta_one[1] == doctest::Approx(2.0));

  const Vector equal = smooth_feature(Vector{5.0, -1.0}, history, 0.3);
  CHECK(equal[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(equal[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("fa_loss") {
  const Vector hg = {1.0, 0.0};
  const Vector hl = {1.0, 0.0};
  EnsembleState ens;
  const ScalarLoss same = fa_loss(Vector{0.0, 0.0}, hg, hl, ens);
  CHECK(same.d_a_global == 0.0);
  CHECK(same.d_a_local == 0.0);

  // Distances (2, 4) at e = 0.5: value 3, dL/de = -2 chained through the
  // softmax jacobian 0.25.
  const Vector h = {0.0, 0.0};
  const Vector g2 = {2.0, 0.0};
  const Vector l4 = {4.0, 0.0};
  const ScalarLoss l = fa_loss(h, g2, l4, ens);
  CHECK(l.value == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(l.d_a_global == doctest::Approx(-2.0 * 0.25).epsilon(1e-12));
  CHECK(l.d_a_local == doctest::Approx(2.0 * 0.25).epsilon(1e-12));

  RngStream rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 3 + rng.below(5);
    const Vector hs = random_vector(d, rng);
    const Vector hgr = random_vector(d, rng);
    const Vector hlr = random_vector(d, rng);
    EnsembleState e{rng.normal(), rng.normal()};
    const ScalarLoss loss = fa_loss(hs, hgr, hlr, e);
    const double err = oracles::finite_difference_error(
        [&](const Vector& v) {
          return fa_loss(hs, hgr, hlr, EnsembleState{v[0], v[1]}).value;
        },
        Vector{e.a_global, e.a_local}, Vector{loss.d_a_global, loss.d_a_local}, 1e-5);
    CHECK(err < 1e-5);

    // Steering direction: the sign of dL/de equals the sign of the distance gap.
    const double gap = fedthe::nn::l2_distance(hs, hgr) - fedthe::nn::l2_distance(hs, hlr);
    const auto [dg, dl_] = e.chain(1.0);
    (void)dl_;
    if (std::abs(gap) > 1e-12) {
      CHECK(std::signbit(loss.d_a_global / dg) == std::signbit(gap));
    }
  }
}

TEST_CASE("slw_lambda") {
  const Vector same = {1.0, 2.0, -0.5};
  CHECK(slw_lambda(same, same) == doctest::Approx(1.0).epsilon(1e-12));

  Vector one_hot_a(4, 0.0);
  Vector one_hot_b(4, 0.0);
  one_hot_a[0] = 40.0;
  one_hot_b[3] = 40.0;
  CHECK(slw_lambda(one_hot_a, one_hot_b) < 1e-10);

  // p_g = (0.5, 0.5) against p_l -> (1, 0): cosine 1/sqrt(2).
  const Vector flat = {0.0, 0.0};
  const Vector spike = {40.0, 0.0};
  CHECK(slw_lambda(flat, spike) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

  RngStream rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector a = random_vector(5, rng, 3.0);
    const Vector b = random_vector(5, rng, 3.0);
    const double lambda = slw_lambda(a, b);
    CHECK(lambda >= 0.0);
    CHECK(lambda <= 1.0);
  }
}

TEST_CASE("the_loss composition") {
  RngStream rng(13);
  const Vector yg = random_vector(4, rng, 2.0);
  const Vector hs = random_vector(3, rng);
  const Vector hg = random_vector(3, rng);
  const Vector hl = random_vector(3, rng);
  EnsembleState ens{0.2, -0.1};

  // Identical heads: lambda is exactly 1, so the loss is pure EM.
  const ScalarLoss slw_same = the_loss(yg, yg, hs, hg, hl, ens, LossMode::Slw);
  CHECK(slw_same.value == doctest::Approx(em_loss(yg, yg, ens).value).epsilon(1e-12));

  // Composition against independent re-evaluation.
  const Vector yl = random_vector(4, rng, 2.0);
  const double lambda = slw_lambda(yg, yl);
  const double expect = lambda * em_loss(yg, yl, ens).value +
                        (1.0 - lambda) * fa_loss(hs, hg, hl, ens).value;
  CHECK(the_loss(yg, yl, hs, hg, hl, ens, LossMode::Slw).value ==
        doctest::Approx(expect).epsilon(1e-12));

  const double expect_half =
      0.5 * em_loss(yg, yl, ens).value + 0.5 * fa_loss(hs, hg, hl, ens).value;
  CHECK(the_loss(yg, yl, hs, hg, hl, ens, LossMode::FixedHalf).value ==
        doctest::Approx(expect_half).epsilon(1e-12));

  // FA-only with the test feature sitting on the global descriptor: loss
  // decreases as e grows.
  const ScalarLoss fa_only = the_loss(yg, yl, hg, hg, hl, ens, LossMode::FaOnly);
  const auto [jac, unused] = ens.chain(1.0);
  (void)unused;
  CHECK(fa_only.d_a_global / jac < 0.0);
}

TEST_CASE("optimize_e fixed points and steering") {
  AdaptConfig config;

  SUBCASE("symmetric inputs stay at one half") {
    const Vector y = {1.0, 2.0, 0.0};
    const Vector hs = {0.0, 0.0};
    const Vector hg = {1.0, 1.0};
    const Vector hl = {-1.0, -1.0};
    const double e = optimize_e(y, y, hs, hg, hl, config);
    CHECK(std::abs(e - 0.5) < 1e-9);
  }

  SUBCASE("feature alignment drives e toward the matching head") {
    config.loss_mode = LossMode::FaOnly;
    const Vector yg = {1.0, 0.0};
    const Vector yl = {0.0, 1.0};
    const Vector hg = {0.0, 0.0, 0.0};
    const Vector hl = {10.0, 0.0, 0.0};
    const double toward_global = optimize_e(yg, yl, hg, hg, hl, config);
    CHECK(toward_global > 0.9);
    const double toward_local = optimize_e(yg, yl, hl, hg, hl, config);
    CHECK(toward_local < 0.1);
  }

  SUBCASE("entropy minimization favors the confident head") {
    config.loss_mode = LossMode::EmOnly;
    Vector confident(5, 0.0);
    confident[2] = 12.0;
    const Vector uniform(5, 0.0);
    const Vector hs = {0.0};
    const Vector hg = {0.0};
    const Vector hl = {0.0};
    const double e = optimize_e(confident, uniform, hs, hg, hl, config);
    CHECK(e > 0.5);
  }

  SUBCASE("pinned e bypasses optimization") {
    config.pin_e = 0.25;
    const Vector y = {3.0, 1.0};
    CHECK(optimize_e(y, y, Vector{0.0}, Vector{1.0}, Vector{2.0}, config) == 0.25);
  }
}

TEST_CASE("update_history") {
  HistoryState history;
  history.feature = Vector{1.0, 1.0};
  update_history(history, Vector{2.0, 2.0}, 0.1);
  CHECK((*history.feature)[0] == doctest::Approx(1.1).epsilon(1e-12));
  CHECK((*history.feature)[1] == doctest::Approx(1.1).epsilon(1e-12));

  update_history(history, Vector{7.0, -3.0}, 1.0);
  CHECK((*history.feature)[0] == 7.0);
  CHECK((*history.feature)[1] == -3.0);

  HistoryState unset;
  update_history(unset, Vector{4.0}, 0.1);
  CHECK((*unset.feature)[0] == 4.0);

  // Geometric convergence to a repeated feature.
  HistoryState conv;
  conv.feature = Vector{0.0};
  const double alpha = 0.25;
  const int n = 30;
  for (int i = 0; i < n; ++i) {
    update_history(conv, Vector{1.0}, alpha);
  }
  const double expect = 1.0 - std::pow(1.0 - alpha, n);
  CHECK((*conv.feature)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("memo marginal loss with one identity view is the plain entropy") {
  const TrainedSetup s = trained_setup();
  const Vector& x0 = [&] {
    static Vector x(s.benches[0].stream(StreamKind::Id).input(0).begin(),
                    s.benches[0].stream(StreamKind::Id).input(0).end());
    return x;
  }();
  TwoHeadModel model{s.fed.server.extractor, s.fed.server.global_head,
                     s.fed.clients[0].personal_head};
  const double e_star = 0.7;
  const MemoLoss loss = memo_marginal_loss(model, {x0}, e_star);

  const Vector h = nn::forward_extract(model.extractor, x0);
  const Vector mixed = ensemble_logits(nn::forward_head(model.global_head, h),
                                       nn::forward_head(model.personal_head, h), e_star);
  CHECK(loss.value == doctest::Approx(nn::shannon_entropy(mixed).value).epsilon(1e-12));
}

TEST_CASE("memo gradient matches finite differences on a small model") {
  RngStream rng(23);
  TwoHeadModel model;
  model.extractor = nn::make_extractor({4, 5, 3}, rng);
  model.global_head = nn::make_head(4, 3, rng);
  model.personal_head = nn::make_head(4, 3, rng);
  std::vector<Vector> views = {random_vector(4, rng), random_vector(4, rng),
                               random_vector(4, rng)};
  const double e_star = 0.35;
  const MemoLoss loss = memo_marginal_loss(model, views, e_star);

  auto check_tensor = [&](std::vector<double>& params, const std::vector<double>& g) {
    Vector analytic(g.begin(), g.end());
    Vector at(params.begin(), params.end());
    const double err = oracles::finite_difference_error(
        [&](const Vector& v) {
          for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] = v[i];
          }
          const double out = memo_marginal_loss(model, views, e_star).value;
          for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] = at[i];
          }
          return out;
        },
        at, analytic);
    CHECK(err < 1e-4);
  };
  check_tensor(model.extractor.layers[0].weights.data,
               loss.grads.extractor.layers[0].weights.data);
  check_tensor(model.global_head.fc.weights.data, loss.grads.global_head.fc.weights.data);
  check_tensor(model.personal_head.fc.bias, loss.grads.personal_head.fc.bias);
}

TEST_CASE("memo fine-tuning reduces the marginal entropy in most trials") {
  RngStream rng(29);
  int improved = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    TwoHeadModel model;
    model.extractor = nn::make_extractor({6, 8, 4}, rng);
    model.global_head = nn::make_head(5, 4, rng);
    model.personal_head = nn::make_head(5, 4, rng);
    std::vector<Vector> views;
    for (int b = 0; b < 8; ++b) {
      views.push_back(random_vector(6, rng));
    }
    const double e_star = 0.5;
    const double before = memo_marginal_loss(model, views, e_star).value;
    AdaptConfig config;
    for (int step = 0; step < config.ft_steps; ++step) {
      const MemoLoss loss = memo_marginal_loss(model, views, e_star);
      nn::sgd_step(model.extractor, loss.grads.extractor, config.ft_lr);
      nn::sgd_step(model.global_head, loss.grads.global_head, config.ft_lr);
      nn::sgd_step(model.personal_head, loss.grads.personal_head, config.ft_lr);
    }
    const double after = memo_marginal_loss(model, views, e_star).value;
    improved += after <= before ? 1 : 0;
  }
  CHECK(static_cast<double>(improved) / trials >= 0.9);
}

TEST_CASE("pinned ensemble weights reproduce the single-head predictions") {
  const TrainedSetup s = trained_setup();
  const data::LabeledSet& stream = s.benches[0].stream(StreamKind::Mixture);

  AdaptConfig adapt;
  const StreamResult global =
      predict_stream(Method::Global, s.context(adapt), StreamKind::Mixture, stream);

  AdaptConfig pinned_global = adapt;
  pinned_global.pin_e = 1.0;
  const StreamResult the_g = predict_stream(Method::FedThe, s.context(pinned_global),
                                            StreamKind::Mixture, stream);
  CHECK(the_g.predictions == global.predictions);

  AdaptConfig pinned_local = adapt;
  pinned_local.pin_e = 0.0;
  const StreamResult the_l = predict_stream(Method::FedThe, s.context(pinned_local),
                                            StreamKind::Mixture, stream);
  // e = 0 is exactly the personalized head on the shared extractor.
  StreamResult expect;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Vector h = nn::forward_extract(s.fed.server.extractor, stream.input(i));
    const Vector logits = nn::forward_head(s.fed.clients[0].personal_head, h);
    expect.predictions.push_back(static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
  CHECK(the_l.predictions == expect.predictions);
}

TEST_CASE("fedthe_plus with zero fine-tune lr equals fedthe") {
  const TrainedSetup s = trained_setup();
  const data::LabeledSet& stream = s.benches[0].stream(StreamKind::Id);
  AdaptConfig adapt;
  adapt.ft_lr = 0.0;
  const StreamResult plain =
      predict_stream(Method::FedThe, s.context(adapt), StreamKind::Id, stream);
  const StreamResult plus =
      predict_stream(Method::FedThePlus, s.context(adapt), StreamKind::Id, stream);
  CHECK(plain.predictions == plus.predictions);
  REQUIRE(plain.e_trace.size() == plus.e_trace.size());
  for (std::size_t i = 0; i < plain.e_trace.size(); ++i) {
    CHECK(plain.e_trace[i].one_minus_e == plus.e_trace[i].one_minus_e);
  }
}

TEST_CASE("adaptation never mutates the persistent models") {
  const TrainedSetup s = trained_setup();
  const auto fp_extractor = nn::parameter_fingerprint(s.fed.server.extractor);
  const auto fp_global = nn::parameter_fingerprint(s.fed.server.global_head);
  const auto fp_personal = nn::parameter_fingerprint(s.fed.clients[0].personal_head);
  const auto fp_ft_e = nn::parameter_fingerprint(s.ft.extractor);

  AdaptConfig adapt;
  for (Method method : {Method::FedThe, Method::FedThePlus, Method::MemoG,
                        Method::MemoP}) {
    predict_stream(method, s.context(adapt), StreamKind::Id,
                   s.benches[0].stream(StreamKind::Id));
  }
  CHECK(nn::parameter_fingerprint(s.fed.server.extractor) == fp_extractor);
  CHECK(nn::parameter_fingerprint(s.fed.server.global_head) == fp_global);
  CHECK(nn::parameter_fingerprint(s.fed.clients[0].personal_head) == fp_personal);
  CHECK(nn::parameter_fingerprint(s.ft.extractor) == fp_ft_e);
}

TEST_CASE("stream evaluation is bitwise reproducible") {
  const TrainedSetup s = trained_setup();
  AdaptConfig adapt;
  for (Method method : {Method::FedThe, Method::FedThePlus, Method::MemoP}) {
    const StreamResult a = predict_stream(method, s.context(adapt), StreamKind::Mixture,
                                          s.benches[0].stream(StreamKind::Mixture));
    const StreamResult b = predict_stream(method, s.context(adapt), StreamKind::Mixture,
                                          s.benches[0].stream(StreamKind::Mixture));
    CHECK(a.predictions == b.predictions);
    REQUIRE(a.e_trace.size() == b.e_trace.size());
    for (std::size_t i = 0; i < a.e_trace.size(); ++i) {
      CHECK(a.e_trace[i].one_minus_e == b.e_trace[i].one_minus_e);
    }
  }
}

TEST_CASE("batch-wise adaptation stays close to sample-wise") {
  const TrainedSetup s = trained_setup();
  const data::LabeledSet& stream = s.benches[0].stream(StreamKind::Mixture);
  AdaptConfig sample_wise;
  AdaptConfig batch_wise;
  batch_wise.batch_wise = true;
  batch_wise.batch_size = 32;
  const double acc_sample =
      predict_stream(Method::FedThe, s.context(sample_wise), StreamKind::Mixture, stream)
          .accuracy();
  const double acc_batch =
      predict_stream(Method::FedThe, s.context(batch_wise), StreamKind::Mixture, stream)
          .accuracy();
  CHECK(std::abs(acc_sample - acc_batch) < 0.15);
}

TEST_CASE("ensemble methods require descriptors") {
  const TrainedSetup s = trained_setup();
  AdaptConfig adapt;
  EvalContext ctx = s.context(adapt);
  ctx.local_descriptor.clear();
  CHECK_THROWS_AS(predict_stream(Method::FedThe, ctx, StreamKind::Id,
                                 s.benches[0].stream(StreamKind::Id)),
                  std::invalid_argument);
}

TEST_CASE("augmentations preserve dimension and identity is exact") {
  RngStream rng(41);
  AugmentationSpec spec{2.0};
  const Vector x = random_vector(6, rng);
  const Vector same = apply_augment(spec, 0, x, rng);
  CHECK(same == x);
  for (int kind = 1; kind < kNumAugmentKinds; ++kind) {
    const Vector y = apply_augment(spec, kind, x, rng);
    CHECK(y.size() == x.size());
  }
  CHECK_THROWS_AS(apply_augment(spec, 9, x, rng), std::invalid_argument);
}
