#include <benchmark/benchmark.h>

#include "semtest/autodiff.hpp"
#include "semtest/baseline.hpp"
#include "semtest/models.hpp"
#include "semtest/random.hpp"
#include "semtest/synthdata.hpp"
#include "semtest/testgen.hpp"

using namespace semtest;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_tensor(rng, {32, n});
  const Tensor b = random_tensor(rng, {n, n});
  for (auto _ : state) {
    ad::Graph g;
    const ad::Var x = g.leaf(a), w = g.leaf(b);
    const auto grads = g.backward(g.sum(g.matmul(x, w)), {x, w});
    benchmark::DoNotOptimize(grads);
  }
  state.SetItemsProcessed(state.iterations() * 3 * 32 * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(64)->Arg(256)->Arg(512);

void BM_GeneratorForward(benchmark::State& state) {
  const GeneratorModel g = GeneratorModel::initialize(GeneratorSpec{}, 2);
  const Tensor z = sample_seed_latent(g.latent_dim(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(z, 1));
}
BENCHMARK(BM_GeneratorForward);

void BM_ClassifierPredict(benchmark::State& state) {
  const ClassifierModel f = ClassifierModel::initialize(ClassifierSpec{}, 4);
  Rng rng(5);
  Tensor x(image_shape());
  for (double& v : x.data()) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(f.predict(x));
}
BENCHMARK(BM_ClassifierPredict);

void BM_GenerateTest(benchmark::State& state) {
  const GeneratorModel g = GeneratorModel::initialize(GeneratorSpec{}, 6);
  const ClassifierModel f = ClassifierModel::initialize(ClassifierSpec{}, 7);
  TestGenConfig cfg;
  cfg.max_iterations = static_cast<std::size_t>(state.range(0));
  cfg.epsilon = 1e9;
  const Tensor z = sample_seed_latent(g.latent_dim(), 8);
  const std::size_t y0 = f.predict(g.forward(z, 0).image).predicted;
  for (auto _ : state) benchmark::DoNotOptimize(generate_test_from(g, f, z, y0, 1 - y0, cfg));
}
BENCHMARK(BM_GenerateTest)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_PgdAttack(benchmark::State& state) {
  const ClassifierModel f = ClassifierModel::initialize(ClassifierSpec{}, 9);
  Rng rng(10);
  Tensor x(image_shape());
  for (double& v : x.data()) v = rng.uniform();
  const AttackConfig cfg = AttackConfig::with_budget(Norm::Linf, kDefaultLinfEpsilon, 40);
  const std::size_t y = f.predict(x).predicted;
  for (auto _ : state) benchmark::DoNotOptimize(pgd_attack(f, x, y, cfg));
}
BENCHMARK(BM_PgdAttack)->Unit(benchmark::kMillisecond);

void BM_Project(benchmark::State& state) {
  Rng rng(11);
  const Tensor delta = random_tensor(rng, {kImageNumel});
  const Norm norm = state.range(0) == 0 ? Norm::Linf : Norm::L2;
  for (auto _ : state) benchmark::DoNotOptimize(project(delta, norm, 0.1));
}
BENCHMARK(BM_Project)->Arg(0)->Arg(1);

void BM_Render(benchmark::State& state) {
  Rng rng(12);
  const SceneParams p = sample_scene(rng, 1);
  for (auto _ : state) benchmark::DoNotOptimize(render(p));
}
BENCHMARK(BM_Render);

void BM_ExtractFeatures(benchmark::State& state) {
  Rng rng(13);
  const Tensor image = render(sample_scene(rng, 0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(image, 2));
}
BENCHMARK(BM_ExtractFeatures);

}  // namespace
BENCHMARK_MAIN();
