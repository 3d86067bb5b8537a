#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "testutil.hpp"
#include "unc/evaluation.hpp"

using namespace unc;
namespace fs = std::filesystem;

namespace {

FeedForwardClassifier trained_blob_model(std::uint64_t seed, std::size_t epochs = 10) {
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 300, 5);
  Rng rng(seed);
  FeedForwardClassifier model(dense_architecture(64, 16, 4), {1, 8, 8}, 4, 3, rng);
  OptimizerConfig cfg;
  cfg.epochs = epochs;
  train_classifier(model, data, cfg, rng);
  return model;
}

// Biases the mask model so probabilities saturate at the given sign.
void saturate_mask_model(MaskModel& m, double bias) {
  std::fill(m.raw_tensors()[7].data().begin(), m.raw_tensors()[7].data().end(), bias);
  for (std::size_t i = 0; i + 1 < m.raw_tensors().size(); ++i) {
    std::fill(m.raw_tensors()[i].data().begin(), m.raw_tensors()[i].data().end(), 0.0);
  }
}

}  // namespace

TEST_CASE("accuracy: constant predictor on a balanced set scores 1/K") {
  Dataset data = synth_dataset(SynthKind::digits, 200, 3);
  Rng rng(1);
  FeedForwardClassifier model(dense_architecture(784, 4, 10), {1, 28, 28}, 10, 3, rng);
  for (Tensor p : model.parameters()) std::fill(p.data().begin(), p.data().end(), 0.0);
  // All logits zero: argmax is class 0 on every example.
  CHECK(accuracy(model, data, std::nullopt, 7) == doctest::Approx(0.10));
}

TEST_CASE("accuracy: a perfectly fit model scores 1.0") {
  auto model = trained_blob_model(11, 14);
  Dataset train = synth_dataset(SynthKind::gaussian_blobs, 300, 5);
  CHECK(accuracy(model, train, std::nullopt, 7) == doctest::Approx(1.0));
  Dataset empty;
  CHECK_THROWS_AS(accuracy(model, empty, std::nullopt, 7), ValueError);
}

TEST_CASE("l0 sparsity fraction counting") {
  Rng rng(5);
  Tensor x = Tensor::uniform({1, 3, 2, 2}, 0.0, 1.0, rng);
  CHECK(l0_sparsity_fraction(x, x) == 0.0);

  Tensor moved = x.clone(false);
  for (std::size_t i : {0u, 2u, 5u, 7u, 11u}) moved.data()[i] += 0.01;
  CHECK(l0_sparsity_fraction(x, moved) == doctest::Approx(5.0 / 12.0));
  CHECK_THROWS_AS(l0_sparsity_fraction(x, Tensor::zeros({4})), ShapeError);
}

TEST_CASE("categorical KL: closed forms and nonnegativity") {
  std::vector<double> onehot{1.0, 0.0};
  std::vector<double> uniform{0.5, 0.5};
  CHECK(categorical_kl(onehot, uniform) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(categorical_kl(uniform, uniform) == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(5), q(5);
    double ps = 0, qs = 0;
    for (int i = 0; i < 5; ++i) {
      p[i] = -std::log(rng.uniform_open());
      q[i] = -std::log(rng.uniform_open());
      ps += p[i];
      qs += q[i];
    }
    for (int i = 0; i < 5; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    CHECK(categorical_kl(p, q) >= 0.0);
  }
}

TEST_CASE("run_attack_eval: zero-radius attack leaves accuracy unchanged") {
  auto model = trained_blob_model(13);
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 40, 6);
  ThreatConfig threat;
  threat.epsilon = 0.0;
  threat.steps = 3;
  EvalReport report = run_attack_eval(model, data, threat, nullptr, 21);
  CHECK(report.post_attack_accuracy == report.clean_accuracy);
  CHECK(report.asr_drop == 0.0);
  for (const EvalRow& r : report.rows) {
    CHECK(r.l0_fraction == 0.0);
    CHECK(r.linf == 0.0);
    CHECK(r.adv_pred == r.clean_pred);
  }
}

TEST_CASE("run_attack_eval: an all-zero mask blocks the attack") {
  auto model = trained_blob_model(17);
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 30, 7);
  Rng rng(1);
  MaskModel mask({1, 8, 8}, rng, 4, 8);
  saturate_mask_model(mask, -50.0);
  ThreatConfig threat;
  threat.epsilon = 0.3;
  threat.steps = 8;
  EvalReport report = run_attack_eval(model, data, threat, &mask, 22);
  CHECK(report.post_attack_accuracy == report.clean_accuracy);
  CHECK(report.mean_mask_density == 0.0);
  CHECK(report.mean_l0_fraction == 0.0);
}

TEST_CASE("run_attack_eval: l0 never exceeds the mask density") {
  auto model = trained_blob_model(19);
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 30, 8);
  Rng rng(2);
  MaskModel mask({1, 8, 8}, rng, 4, 8);
  ThreatConfig threat;
  threat.epsilon = 0.3;
  threat.steps = 8;
  EvalReport report = run_attack_eval(model, data, threat, &mask, 23);
  for (const EvalRow& r : report.rows) {
    CHECK(r.l0_fraction <= r.mask_density + 1e-12);
  }
}

TEST_CASE("transferability: self-transfer equals the attack evaluation") {
  auto model = trained_blob_model(23);
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 40, 9);
  ThreatConfig threat;
  threat.epsilon = 0.2;
  threat.steps = 10;
  EvalReport direct = run_attack_eval(model, data, threat, nullptr, 31);
  const double self_transfer = transferability_eval(model, model, data, threat, 31);
  CHECK(self_transfer == doctest::Approx(direct.post_attack_accuracy).epsilon(1e-12));

  ThreatConfig null_threat;
  null_threat.epsilon = 0.0;
  null_threat.steps = 2;
  const double clean = accuracy(model, data, std::nullopt, 31);
  CHECK(transferability_eval(model, model, data, null_threat, 31) ==
        doctest::Approx(clean).epsilon(1e-12));
}

TEST_CASE("transferability: crafted examples hurt a stochastic target") {
  Dataset full = synth_dataset(SynthKind::gaussian_blobs, 360, 5);
  Dataset train = full.slice(0, 300, "train");
  Dataset eval = full.slice(300, 360, "eval");
  auto source = trained_blob_model(29);

  Rng rng(31);
  std::vector<LayerSpec> specs{LayerSpec::Flatten(), LayerSpec::Dense(64, 16),
                               LayerSpec::Relu(), LayerSpec::Dropout(0.2),
                               LayerSpec::Dense(16, 4)};
  FeedForwardClassifier target(specs, {1, 8, 8}, 4, 3, rng);
  OptimizerConfig cfg;
  cfg.epochs = 12;
  train_classifier(target, train, cfg, rng);

  EvalOptions opts;
  opts.stochastic_samples = 10;
  const double clean = accuracy(target, eval, 10, 41);
  CHECK(clean >= 0.9);
  ThreatConfig threat;
  threat.epsilon = 0.3;
  threat.steps = 15;
  const double post = transferability_eval(source, target, eval, threat, 41, opts);
  CHECK(post < clean);
}

TEST_CASE("ablation: densities match and full-density random equals unmasked") {
  auto model = trained_blob_model(31);
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 30, 10);
  Rng rng(3);
  MaskModel mask({1, 8, 8}, rng, 4, 8);
  saturate_mask_model(mask, 50.0);  // learned masks all ones -> density 1.0
  ThreatConfig threat;
  threat.epsilon = 0.3;
  threat.steps = 8;

  AblationReport ab = ablation_random_vs_uncertainty(model, data, mask, threat, 51);
  CHECK(std::abs(ab.learned_density - ab.random_density) <= 0.02);
  CHECK(ab.learned_density == doctest::Approx(1.0));

  // Density-1.0 random masks reproduce the unmasked attack exactly.
  EvalReport unmasked = run_attack_eval(model, data, threat, nullptr, 51);
  REQUIRE(ab.random.rows.size() == unmasked.rows.size());
  for (std::size_t i = 0; i < unmasked.rows.size(); ++i) {
    CHECK(ab.random.rows[i].adv_pred == unmasked.rows[i].adv_pred);
    CHECK(ab.random.rows[i].l0_fraction == unmasked.rows[i].l0_fraction);
    CHECK(ab.random.rows[i].linf == unmasked.rows[i].linf);
    CHECK(ab.random.rows[i].loss_final == unmasked.rows[i].loss_final);
  }
}

TEST_CASE("surrogate fidelity returns finite nonnegative divergences") {
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 200, 5);
  auto det = trained_blob_model(37);
  Rng rng(41);
  SurrogateModel surrogate(16, 4, rng, 0.0);
  SurrogateTrainConfig scfg;
  scfg.epochs = 3;
  train_surrogate(det, surrogate, data, scfg, rng);
  MeanFieldClassifier mf(dense_architecture(64, 16, 4), {1, 8, 8}, 4, 3, rng);
  OptimizerConfig cfg;
  cfg.epochs = 8;
  train_meanfield_classifier(mf, data, cfg, rng);

  const auto [kl_d, kl_s] = surrogate_fidelity(det, surrogate, mf, data, 10, 61);
  CHECK(std::isfinite(kl_d));
  CHECK(std::isfinite(kl_s));
  CHECK(kl_d >= 0.0);
  CHECK(kl_s >= 0.0);
}

TEST_CASE("report: emit, parse, aggregate verification") {
  const fs::path dir = fs::temp_directory_path() / "unc_eval_report_test";
  fs::create_directories(dir);

  auto model = trained_blob_model(41);
  Dataset data = synth_dataset(SynthKind::gaussian_blobs, 25, 11);
  ThreatConfig threat;
  threat.epsilon = 0.2;
  threat.steps = 6;
  EvalReport report = run_attack_eval(model, data, threat, nullptr, 71);
  report.config_fingerprint = "cafef00d";
  const std::string path = (dir / "report.csv").string();
  emit_report(report, path);

  EvalReport parsed = parse_report(path);
  CHECK(parsed.rows.size() == report.rows.size());
  CHECK(parsed.clean_accuracy == doctest::Approx(report.clean_accuracy).epsilon(1e-9));
  CHECK(parsed.post_attack_accuracy ==
        doctest::Approx(report.post_attack_accuracy).epsilon(1e-9));
  CHECK(parsed.mean_l0_fraction == doctest::Approx(report.mean_l0_fraction).epsilon(1e-6));
  CHECK(parsed.config_fingerprint == "cafef00d");
  CHECK(parsed.seed == 71);

  // Same schema for a different seed: identical header, same row count.
  EvalReport other = run_attack_eval(model, data, threat, nullptr, 72);
  const std::string path2 = (dir / "report2.csv").string();
  emit_report(other, path2);
  std::ifstream f1(path), f2(path2);
  std::string header1, header2, comment;
  std::getline(f1, comment);
  std::getline(f1, header1);
  std::getline(f2, comment);
  std::getline(f2, header2);
  CHECK(header1 == header2);

  // Tampered summary is rejected.
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.rfind("SUMMARY,");
  text.replace(pos + 8, 1, "9");
  const std::string bad_path = (dir / "bad.csv").string();
  std::ofstream out(bad_path, std::ios::binary);
  out << text;
  out.close();
  CHECK_THROWS_AS(parse_report(bad_path), IoError);

  fs::remove_all(dir);
}

TEST_CASE("report: empty example list still emits header and summary") {
  const fs::path dir = fs::temp_directory_path() / "unc_eval_empty_test";
  fs::create_directories(dir);
  EvalReport empty;
  empty.recompute_aggregates();
  const std::string path = (dir / "empty.csv").string();
  emit_report(empty, path);
  EvalReport parsed = parse_report(path);
  CHECK(parsed.rows.empty());
  CHECK(parsed.clean_accuracy == 0.0);
  fs::remove_all(dir);
}
