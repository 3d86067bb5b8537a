#include <cmath>

#include "doctest.h"
#include "testutil.hpp"
#include "unc/dataset.hpp"
#include "unc/gradcheck.hpp"
#include "unc/nn.hpp"

using namespace unc;

namespace {

FeedForwardClassifier tiny_dense(std::size_t in, std::size_t hidden, std::size_t k,
                                 std::uint64_t seed) {
  Rng rng(seed);
  return FeedForwardClassifier(dense_architecture(in, hidden, k), {1, 1, in}, k, 3, rng);
}

void zero_params(Classifier& m) {
  for (Tensor p : m.parameters()) std::fill(p.data().begin(), p.data().end(), 0.0);
}

}  // namespace

TEST_CASE("zero-weight model gives zero logits and uniform softmax") {
  auto model = tiny_dense(4, 6, 3, 1);
  zero_params(model);
  Tensor x = Tensor::from_vector({1, 1, 1, 4}, {0.3, -0.1, 0.9, 0.2});
  Tensor logits = model.predict_logits(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(logits.at(i) == 0.0);
  Tensor p = softmax_lastdim(logits);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.at(i) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("dropout model with stochastic=false is deterministic") {
  Rng rng(5);
  auto specs = conv_image_architecture(1, 8, 8, 3, 0.3);
  FeedForwardClassifier model(specs, {1, 8, 8}, 3, conv_image_embedding_boundary(0.3), rng);
  CHECK(model.is_stochastic());
  Tensor x = Tensor::uniform({1, 1, 8, 8}, 0.0, 1.0, rng);
  Tensor a = predict_logits(model, x, false, nullptr);
  Tensor b = predict_logits(model, x, false, nullptr);
  CHECK(testutil::bits_equal(a, b));
}

TEST_CASE("stochastic forward on a deterministic model is rejected") {
  auto model = tiny_dense(4, 6, 3, 2);
  Rng rng(1);
  Tensor x = Tensor::zeros({1, 1, 1, 4});
  CHECK_THROWS_AS(predict_logits(model, x, true, &rng), UnsupportedModelError);
  CHECK_THROWS_AS(sample_posterior_predictives(model, x, 3, rng), UnsupportedModelError);
}

TEST_CASE("mean-field with sigma -> 0 equals the deterministic forward at mu") {
  Rng rng(7);
  MeanFieldClassifier model(dense_architecture(5, 8, 4), {1, 1, 5}, 4, 3, rng);
  for (auto& vp : model.variational_parameters()) {
    std::fill(vp.rho_w.data().begin(), vp.rho_w.data().end(), -60.0);
    std::fill(vp.rho_b.data().begin(), vp.rho_b.data().end(), -60.0);
  }
  Tensor x = Tensor::uniform({2, 1, 1, 5}, -1.0, 1.0, rng);
  Rng sampler(3);
  Tensor sampled = predict_logits(model, x, true, &sampler);
  Tensor at_mean = model.predict_logits(x);
  CHECK(testutil::max_abs_diff(sampled.data(), at_mean.data()) < 1e-12);

  auto vecs = sample_posterior_predictives(model, Tensor::uniform({1, 1, 1, 5}, -1, 1, rng), 5,
                                           sampler);
  for (std::size_t t = 1; t < vecs.size(); ++t) {
    for (std::size_t j = 0; j < vecs[0].size(); ++j) {
      CHECK(vecs[t][j] == doctest::Approx(vecs[0][j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("posterior predictive sampling is reproducible and valid") {
  Rng rng(11);
  MeanFieldClassifier model(dense_architecture(6, 10, 3), {1, 1, 6}, 3, 3, rng);
  Tensor x = Tensor::uniform({1, 1, 1, 6}, -1.0, 1.0, rng);

  Rng s1(42), s2(42);
  auto a = sample_posterior_predictives(model, x, 3, s1);
  auto b = sample_posterior_predictives(model, x, 3, s2);
  REQUIRE(a.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::memcmp(&a[t][j], &b[t][j], sizeof(double)) == 0);
    }
    double sum = 0.0;
    for (double v : a[t]) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("dropout predictive mean matches a large-sample oracle") {
  Rng rng(13);
  std::vector<LayerSpec> specs{LayerSpec::Flatten(), LayerSpec::Dense(4, 8), LayerSpec::Relu(),
                               LayerSpec::Dropout(0.4), LayerSpec::Dense(8, 3)};
  FeedForwardClassifier model(specs, {1, 1, 4}, 3, 3, rng);
  Tensor x = Tensor::uniform({1, 1, 1, 4}, 0.0, 1.0, rng);

  // Oracle: the analytic expectation estimated from a much larger run.
  Rng big(1001);
  auto big_samples = sample_posterior_predictives(model, x, 100000, big);
  std::vector<double> big_mean(3, 0.0), big_m2(3, 0.0);
  for (const auto& s : big_samples) {
    for (int j = 0; j < 3; ++j) big_mean[j] += s[j];
  }
  for (int j = 0; j < 3; ++j) big_mean[j] /= big_samples.size();
  for (const auto& s : big_samples) {
    for (int j = 0; j < 3; ++j) big_m2[j] += (s[j] - big_mean[j]) * (s[j] - big_mean[j]);
  }

  Rng small(77);
  auto samples = sample_posterior_predictives(model, x, 100, small);
  std::vector<double> mean(3, 0.0);
  for (const auto& s : samples) {
    for (int j = 0; j < 3; ++j) mean[j] += s[j];
  }
  for (int j = 0; j < 3; ++j) {
    mean[j] /= samples.size();
    const double sd = std::sqrt(big_m2[j] / big_samples.size());
    const double se = sd / std::sqrt(100.0);
    CHECK(std::abs(mean[j] - big_mean[j]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("head composes with embed to reproduce logits bit-exactly") {
  Rng rng(17);
  auto specs = conv_image_architecture(1, 8, 8, 4);
  FeedForwardClassifier model(specs, {1, 8, 8}, 4, conv_image_embedding_boundary(), rng);
  Tensor x = Tensor::uniform({3, 1, 8, 8}, 0.0, 1.0, rng);
  Tensor h = model.embed(x);
  CHECK(h.shape() == Shape{3, 64});
  CHECK(model.embedding_width() == 64);
  Tensor via_head = model.head(h);
  Tensor direct = model.predict_logits(x);
  CHECK(testutil::bits_equal(via_head, direct));

  // Inputs differing anywhere generally embed differently.
  Tensor x2 = x.clone(false);
  x2.data()[5] += 0.25;
  CHECK(testutil::max_abs_diff(model.embed(x2).data(), h.data()) > 0.0);
}

TEST_CASE("training on separable blobs reaches 0.99 accuracy") {
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 400, 9);
  Rng rng(3);
  FeedForwardClassifier model(dense_architecture(64, 16, 4), {1, 8, 8}, 4, 3, rng);
  OptimizerConfig cfg;
  cfg.epochs = 12;
  cfg.learning_rate = 0.1;
  TrainLog log = train_classifier(model, data, cfg, rng);
  CHECK(log.size() == 12);
  CHECK(log.back().accuracy >= 0.99);
}

TEST_CASE("zero epochs leaves the initialization untouched") {
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 32, 9);
  Rng rng_a(21), rng_b(21);
  FeedForwardClassifier fresh(dense_architecture(64, 8, 4), {1, 8, 8}, 4, 3, rng_a);
  FeedForwardClassifier trained(dense_architecture(64, 8, 4), {1, 8, 8}, 4, 3, rng_b);
  OptimizerConfig cfg;
  cfg.epochs = 0;
  train_classifier(trained, data, cfg, rng_b);
  auto pa = fresh.parameters(), pb = trained.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(testutil::bits_equal(pa[i], pb[i]));
}

TEST_CASE("training rejects empty data and bad labels") {
  Rng rng(1);
  FeedForwardClassifier model(dense_architecture(4, 4, 2), {1, 1, 4}, 2, 3, rng);
  OptimizerConfig cfg;
  Dataset empty;
  CHECK_THROWS_AS(train_classifier(model, empty, cfg, rng), ValueError);

  Dataset bad = synth_dataset(SynthKind::gaussian_blobs, 8, 1);
  bad.labels[3] = 9;  // class_count is 4
  Rng rng2(1);
  FeedForwardClassifier m2(dense_architecture(64, 4, 4), {1, 8, 8}, 4, 3, rng2);
  CHECK_THROWS_AS(train_classifier(m2, bad, cfg, rng2), ValueError);
}

TEST_CASE("closed-form KL: zero at the prior, 0.5 for unit-mean weight") {
  Rng rng(19);
  MeanFieldClassifier model({LayerSpec::Flatten(), LayerSpec::Dense(1, 1)}, {1, 1, 1}, 1, 1,
                            rng);
  auto& vp = model.variational_parameters()[0];
  const double rho_for_sigma1 = std::log(std::expm1(1.0));
  // mu = 0, sigma = 1 everywhere -> KL = 0 (two weights: w and b).
  std::fill(vp.mu_w.data().begin(), vp.mu_w.data().end(), 0.0);
  std::fill(vp.mu_b.data().begin(), vp.mu_b.data().end(), 0.0);
  std::fill(vp.rho_w.data().begin(), vp.rho_w.data().end(), rho_for_sigma1);
  std::fill(vp.rho_b.data().begin(), vp.rho_b.data().end(), rho_for_sigma1);
  CHECK(model.kl_to_standard_normal().item() == doctest::Approx(0.0).epsilon(1e-12));

  // Single weight mu=1, sigma=1: KL = (mu^2 + sigma^2 - 1 - ln sigma^2)/2 = 0.5.
  vp.mu_w.data()[0] = 1.0;
  CHECK(model.kl_to_standard_normal().item() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("closed-form KL matches a Monte-Carlo estimate") {
  Rng rng(23);
  MeanFieldClassifier model({LayerSpec::Flatten(), LayerSpec::Dense(2, 1)}, {1, 1, 2}, 1, 1,
                            rng);
  auto& vp = model.variational_parameters()[0];
  vp.mu_w.data()[0] = 0.7;
  vp.mu_w.data()[1] = -0.4;
  vp.mu_b.data()[0] = 0.2;
  vp.rho_w.data()[0] = 0.1;
  vp.rho_w.data()[1] = -1.0;
  vp.rho_b.data()[0] = -0.5;

  const double closed = model.kl_to_standard_normal().item();

  // MC oracle: E_q[log q(w) - log p(w)] over 1e6 draws.
  struct G {
    double mu, sigma;
  };
  std::vector<G> gs;
  for (auto [mu, rho] : {std::pair{0.7, 0.1}, std::pair{-0.4, -1.0}, std::pair{0.2, -0.5}}) {
    gs.push_back({mu, std::log1p(std::exp(rho))});
  }
  Rng mc(4242);
  const std::size_t n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double term = 0.0;
    for (const G& g : gs) {
      const double w = g.mu + g.sigma * mc.normal();
      const double zq = (w - g.mu) / g.sigma;
      const double logq = -0.5 * zq * zq - std::log(g.sigma);
      const double logp = -0.5 * w * w;
      term += logq - logp;
    }
    sum += term;
    sum2 += term * term;
  }
  const double mc_mean = sum / n;
  const double mc_se = std::sqrt((sum2 / n - mc_mean * mc_mean) / n);
  CHECK(std::abs(closed - mc_mean) <= 3.0 * mc_se);
}

TEST_CASE("bbb step: kl_weight=0 reduces to sampled-weight likelihood") {
  Rng rng(29);
  MeanFieldClassifier model(dense_architecture(3, 4, 2), {1, 1, 3}, 2, 3, rng);
  Tensor x = Tensor::uniform({4, 1, 1, 3}, -1.0, 1.0, rng);
  std::vector<int> y{0, 1, 1, 0};

  Rng noise_rng(55);
  PosteriorDraw draw = model.sample_draw(noise_rng);
  Tensor expected = cross_entropy_loss(model.logits_under_draw(x, draw), y);

  SgdMomentum opt(model.parameters(), 0.0, 0.0);  // lr 0: step is a no-op
  Rng step_rng(55);
  const double loss = bbb_train_step(model, x, y, 0.0, opt, step_rng);
  CHECK(loss == doctest::Approx(expected.item()).epsilon(1e-12));
}

TEST_CASE("ELBO gradient matches central differences with frozen noise") {
  Rng rng(31);
  MeanFieldClassifier model(dense_architecture(3, 5, 2), {1, 1, 3}, 2, 3, rng);
  Tensor x = Tensor::uniform({3, 1, 1, 3}, -1.0, 1.0, rng);
  std::vector<int> y{1, 0, 1};
  PosteriorDraw frozen = model.sample_draw(rng);

  auto f = [&]() {
    Tensor nll = cross_entropy_loss(model.logits_under_draw(x, frozen), y);
    return add(nll, mul(model.kl_to_standard_normal(), 0.05));
  };
  std::vector<Tensor> leaves = model.parameters();
  CheckReport r = finite_difference_check(f, leaves, 1e-5, 1e-4);
  INFO("max rel err ", r.max_rel_error);
  CHECK(r.pass);
}

TEST_CASE("dropout at vanishing rate converges to the deterministic model") {
  Rng rng(37);
  std::vector<LayerSpec> specs{LayerSpec::Flatten(), LayerSpec::Dense(4, 6), LayerSpec::Relu(),
                               LayerSpec::Dropout(1e-8), LayerSpec::Dense(6, 3)};
  FeedForwardClassifier model(specs, {1, 1, 4}, 3, 3, rng);
  Tensor x = Tensor::uniform({1, 1, 1, 4}, 0.0, 1.0, rng);

  NoGradGuard guard;
  Tensor det = softmax_lastdim(model.predict_logits(x));
  Rng sampler(7);
  std::vector<double> mean(3, 0.0);
  const int T = 1000;
  for (int t = 0; t < T; ++t) {
    Tensor p = softmax_lastdim(model.logits_under_draw(x, model.sample_draw(sampler)));
    for (int j = 0; j < 3; ++j) mean[j] += p.at(j);
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(mean[j] / T - det.at(j)) <= 1e-6);
  }
}
