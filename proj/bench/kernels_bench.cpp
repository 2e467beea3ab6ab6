#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "dmcl/kernels.hpp"
#include "dmcl/losses.hpp"
#include "dmcl/model.hpp"
#include "dmcl/retrieval.hpp"
#include "dmcl/rng.hpp"

using namespace dmcl;

namespace {

ExecMode mode_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecMode::Serial : ExecMode::Parallel;
}

struct Fixture {
  std::vector<FeatureMap> maps;
  std::vector<std::size_t> indices;
  std::vector<int> labels;
  ModelParams params;

  explicit Fixture(std::size_t n) {
    Rng rng(42);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t h = 2 + i % 3, w = 2 + (i / 3) % 3;
      std::vector<double> v(h * w * 16);
      for (double& x : v) x = rng.uniform(0.0, 2.0);
      maps.emplace_back(h, w, 16, std::move(v));
      labels.push_back(static_cast<int>(i % 20));
    }
    indices.resize(n);
    std::iota(indices.begin(), indices.end(), 0);
    const std::vector<std::size_t> dims{16, 32, 64};
    params = init_params(dims, rng);
  }
};

const Fixture& fixture() {
  static const Fixture f(600);
  return f;
}

void BM_EmbedItems(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(embed_items(f.params, f.maps, f.indices, mode_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.indices.size()));
}

void BM_DistanceMatrix(benchmark::State& state) {
  const Fixture& f = fixture();
  const Mat e = embed_items(f.params, f.maps, f.indices);
  for (auto _ : state) benchmark::DoNotOptimize(distance_matrix(e, e, mode_of(state)));
}

void BM_Evaluate(benchmark::State& state) {
  const Fixture& f = fixture();
  const Mat e = embed_items(f.params, f.maps, f.indices);
  const RetrievalIndex index = RetrievalIndex::build(e, f.labels);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(index, e, f.labels, mode_of(state)));
}

void BM_AccumulateGradients(benchmark::State& state) {
  const Fixture& f = fixture();
  const MarginConfig margins = MarginConfig::preset();
  const SampleGradient sample = [&](std::size_t i, ParamGradients& g) -> std::optional<double> {
    const std::size_t a = i % f.maps.size(), b = (i * 7 + 3) % f.maps.size();
    const Embedded ea = forward_embed(f.params, f.maps[a]);
    const Embedded eb = forward_embed(f.params, f.maps[b]);
    const DistanceWithGrad d = distance_with_grad(ea.embedding, eb.embedding);
    const PairLabel y = f.labels[a] == f.labels[b] ? PairLabel::Similar : PairLabel::Dissimilar;
    const LossValue l = double_margin_loss(d.distance, y, margins);
    Vec ga = d.grad_first;
    for (double& x : ga) x *= l.grad;
    Vec gb = ga;
    for (double& x : gb) x = -x;
    backward_embedding(f.params, ea.trace, ga, g);
    backward_embedding(f.params, eb.trace, gb, g);
    return l.loss;
  };
  for (auto _ : state) {
    ParamGradients acc = zeros_like(f.params);
    benchmark::DoNotOptimize(accumulate_gradients(64, sample, acc, mode_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

BENCHMARK(BM_EmbedItems)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceMatrix)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccumulateGradients)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
