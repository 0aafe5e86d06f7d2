#include <benchmark/benchmark.h>

#include "lelp/baselines.hpp"
#include "lelp/data.hpp"
#include "lelp/lelp.hpp"
#include "lelp/linalg.hpp"
#include "lelp/nn.hpp"
#include "lelp/rng.hpp"

using lelp::Matrix;
using lelp::Rng;
using lelp::Vector;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.normal();
  return m;
}

void BM_TopPca(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Matrix h = random_matrix(16 * d, d, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lelp::linalg::top_pca(h, d / 2));
  }
}
BENCHMARK(BM_TopPca)->Arg(16)->Arg(32)->Arg(64);

void BM_RandomOrthogonal(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lelp::linalg::random_orthogonal(s, seed++));
  }
}
BENCHMARK(BM_RandomOrthogonal)->Arg(8)->Arg(32);

void BM_SubsplitBatch(benchmark::State& state) {
  const std::size_t d = 64, c = 2;
  const auto s = static_cast<std::size_t>(state.range(0));
  lelp::SubclassProjector proj;
  proj.classes = c;
  proj.subclasses = s;
  proj.dim = d;
  proj.beta = 0.5;
  for (std::size_t i = 0; i < c; ++i) {
    proj.means.emplace_back(d, 0.1);
    proj.directions.push_back(random_matrix(s, d, 10 + i));
  }
  const Matrix head = random_matrix(d, c, 20);
  const Vector bias(c, 0.0);
  const Matrix batch = random_matrix(64, d, 30);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lelp::subsplit_batch(batch, proj, head, bias, 2.0));
  }
}
BENCHMARK(BM_SubsplitBatch)->Arg(1)->Arg(10)->Arg(32);

void BM_ForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const lelp::nn::MlpParams model = lelp::nn::make_mlp({16, width, width, 2}, {2, 1}, 3);
  const Matrix batch = random_matrix(64, 16, 4);
  const std::vector<int> labels(64, 1);
  for (auto _ : state) {
    const lelp::nn::ForwardTrace trace = lelp::nn::forward(model, batch);
    const lelp::nn::LossValue loss = lelp::nn::cross_entropy(labels, trace.logits());
    benchmark::DoNotOptimize(lelp::nn::backward(model, trace, loss.logit_grad));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

void BM_KMeansPerClass(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const Matrix points = random_matrix(1000, 16, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lelp::baselines::kmeans_per_class({points}, k, 7));
  }
}
BENCHMARK(BM_KMeansPerClass)->Arg(2)->Arg(5)->Arg(10);

void BM_GenerateSynthetic(benchmark::State& state) {
  lelp::data::SyntheticSpec spec;
  spec.train_size = static_cast<std::size_t>(state.range(0));
  spec.test_size = spec.train_size / 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lelp::data::generate_synthetic(spec));
    ++spec.seed;
  }
}
BENCHMARK(BM_GenerateSynthetic)->Arg(1000)->Arg(8000);

}  // namespace

BENCHMARK_MAIN();
