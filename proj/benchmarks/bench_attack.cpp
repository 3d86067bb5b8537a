#include <benchmark/benchmark.h>

#include "unc/attacks.hpp"
#include "unc/dataset.hpp"
#include "unc/mask.hpp"
#include "unc/uncertainty.hpp"

using namespace unc;

namespace {

FeedForwardClassifier& digit_model() {
  static FeedForwardClassifier model = [] {
    Rng rng(5);
    return FeedForwardClassifier(conv_image_architecture(1, 28, 28, 10), {1, 28, 28}, 10,
                                 conv_image_embedding_boundary(), rng);
  }();
  return model;
}

Dataset& digit_data() {
  static Dataset data = synth_dataset(SynthKind::digits, 64, 9);
  return data;
}

}  // namespace

static void BM_PgdAttack(benchmark::State& state) {
  const int steps = state.range(0);
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  Tensor x = digit_data().batch(idx);
  auto y = digit_data().batch_labels(idx);
  ThreatConfig cfg;
  cfg.epsilon = 0.3;
  cfg.steps = steps;
  for (auto _ : state) {
    Rng rng(7);
    AttackResult res = pgd_attack(digit_model(), x, y, nullptr, cfg, rng);
    benchmark::DoNotOptimize(res.x_adv.data().data());
  }
}
BENCHMARK(BM_PgdAttack)->Arg(10)->Arg(40);

static void BM_RecolorApply(benchmark::State& state) {
  Rng rng(11);
  Dataset shapes = synth_dataset(SynthKind::colored_shapes, 32, 3);
  Tensor x = shapes.batch({0, 1, 2, 3, 4, 5, 6, 7});
  ReColorParams params{Tensor::uniform({8, 8, 8, 3}, -0.03, 0.03, rng)};
  for (auto _ : state) {
    Tensor y = recolor_apply(x, params);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_RecolorApply);

static void BM_GumbelMaskSample(benchmark::State& state) {
  Rng rng(13);
  Tensor probs = Tensor::uniform({16, 1, 28, 28}, 0.05, 0.95, rng);
  for (auto _ : state) {
    Mask m = sample_relaxed_mask(probs, 0.5, rng);
    benchmark::DoNotOptimize(m.values.data().data());
  }
}
BENCHMARK(BM_GumbelMaskSample);

static void BM_MutualInformation(benchmark::State& state) {
  Rng rng(17);
  std::vector<std::vector<double>> samples(10, std::vector<double>(10));
  for (auto& s : samples) {
    double sum = 0;
    for (auto& v : s) {
      v = -std::log(rng.uniform_open());
      sum += v;
    }
    for (auto& v : s) v /= sum;
  }
  for (auto _ : state) {
    UncertaintyEstimate est = mutual_information(samples);
    benchmark::DoNotOptimize(&est);
  }
}
BENCHMARK(BM_MutualInformation);
