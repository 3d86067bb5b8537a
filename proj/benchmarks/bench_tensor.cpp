#include <benchmark/benchmark.h>

#include "unc/nn.hpp"
#include "unc/rng.hpp"
#include "unc/tensor.hpp"

using namespace unc;

static void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  Rng rng(1);
  Tensor a = Tensor::uniform({n, n}, -1, 1, rng);
  Tensor b = Tensor::uniform({n, n}, -1, 1, rng);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

static void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t batch = state.range(0);
  Rng rng(2);
  Tensor x = Tensor::uniform({batch, 1, 28, 28}, 0, 1, rng);
  Tensor w = Tensor::uniform({8, 1, 5, 5}, -1, 1, rng);
  Tensor b = Tensor::uniform({8}, -1, 1, rng);
  for (auto _ : state) {
    Tensor y = conv2d(x, w, b, 2, 2);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(16)->Arg(64);

static void BM_ClassifierBackward(benchmark::State& state) {
  const std::size_t batch = state.range(0);
  Rng rng(3);
  FeedForwardClassifier model(conv_image_architecture(1, 28, 28, 10), {1, 28, 28}, 10,
                              conv_image_embedding_boundary(), rng);
  Tensor x = Tensor::uniform({batch, 1, 28, 28}, 0, 1, rng);
  std::vector<int> labels(batch);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(10));
  for (auto _ : state) {
    Tensor leaf = x.clone(true);
    Tensor loss = cross_entropy_loss(model.predict_logits(leaf), labels);
    GradientMap grads = backward(loss);
    benchmark::DoNotOptimize(&grads);
  }
}
BENCHMARK(BM_ClassifierBackward)->Arg(1)->Arg(16)->Arg(64);

static void BM_SoftmaxEntropyRows(benchmark::State& state) {
  Rng rng(4);
  Tensor logits = Tensor::uniform({256, 10}, -5, 5, rng);
  for (auto _ : state) {
    Tensor p = softmax_lastdim(logits);
    Tensor s = sum_lastdim(mul(p, log(p)));
    benchmark::DoNotOptimize(s.data().data());
  }
}
BENCHMARK(BM_SoftmaxEntropyRows);
