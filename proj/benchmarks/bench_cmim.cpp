#include <random>

#include <benchmark/benchmark.h>

#include "cmim/contrastive.hpp"
#include "cmim/objectives.hpp"
#include "cmim/probes.hpp"
#include "cmim/toy2d.hpp"

namespace {

using namespace cmim;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_CmimLatentLossAndGrad(benchmark::State& state) {
  const auto b = state.range(0);
  const ContrastiveBatch batch{gaussian(b, 16, 1), SimilarityConfig(0.1)};
  for (auto _ : state) benchmark::DoNotOptimize(cmim_latent_loss_and_grad(batch));
  state.SetComplexityN(b);
}
BENCHMARK(BM_CmimLatentLossAndGrad)->RangeMultiplier(4)->Range(4, 1024)->Complexity(benchmark::oNSquared);

void BM_InfoNceLatentLossAndGrad(benchmark::State& state) {
  const auto b = state.range(0);
  const Matrix a = gaussian(b, 16, 2), p = gaussian(b, 16, 3);
  Matrix pg;
  for (auto _ : state)
    benchmark::DoNotOptimize(infonce_latent_loss_and_grad(a, p, SimilarityConfig(0.1), &pg));
}
BENCHMARK(BM_InfoNceLatentLossAndGrad)->RangeMultiplier(4)->Range(4, 1024);

void BM_ToyStepper(benchmark::State& state) {
  const Matrix z = gaussian(1000, 2, 4);
  ToyStepper stepper(1.0);
  Matrix grad;
  for (auto _ : state) benchmark::DoNotOptimize(stepper.loss_and_grad(z, grad));
}
BENCHMARK(BM_ToyStepper)->Unit(benchmark::kMillisecond);

void BM_DenseForwardBackward(benchmark::State& state) {
  const auto b = state.range(0);
  const std::vector<int> hidden{64, 64};
  DenseNet net = DenseNet::mlp(144, hidden, 32);
  Rng rng(5);
  net.init_glorot(rng);
  const Matrix x = gaussian(b, 144, 6);
  const Matrix up = gaussian(b, 32, 7);
  for (auto _ : state) {
    ForwardTape tape;
    forward(net, x, &tape);
    benchmark::DoNotOptimize(backward(net, tape, up));
  }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(4)->Arg(16)->Arg(64)->Arg(256);

void BM_MinibatchLoss(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  Rng rng(8);
  const ModelBundle m = ModelBundle::create(variant, {144, 16, {64, 64}}, 0.1, rng);
  MinibatchInputs in;
  in.x = (gaussian(64, 144, 9).array() > 0).cast<double>().matrix();
  in.augmented_x = in.x;
  in.noise = gaussian(64, 16, 10);
  in.positive_noise = gaussian(64, 16, 11);
  for (auto _ : state) benchmark::DoNotOptimize(minibatch_loss(m, in));
  state.SetLabel(std::string(variant_name(variant)));
}
BENCHMARK(BM_MinibatchLoss)
    ->Arg(static_cast<int>(Variant::cMIM))
    ->Arg(static_cast<int>(Variant::MIM))
    ->Arg(static_cast<int>(Variant::InfoNCE));

void BM_Knn5(benchmark::State& state) {
  const Matrix train = gaussian(1500, 16, 12), test = gaussian(500, 16, 13);
  std::vector<int> labels(1500);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  const auto metric = state.range(0) ? KnnMetric::cosine : KnnMetric::euclidean;
  for (auto _ : state) benchmark::DoNotOptimize(knn5_predict(train, labels, test, metric));
}
BENCHMARK(BM_Knn5)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
