#include <benchmark/benchmark.h>

#include "trafficbench/checksum.hpp"
#include "trafficbench/forest.hpp"
#include "trafficbench/packet.hpp"
#include "trafficbench/rng.hpp"
#include "trafficbench/synth.hpp"

namespace {

using namespace trafficbench;

SynthResult make_corpus(std::size_t classes, std::size_t flows, std::size_t len) {
  SynthSpec spec;
  spec.n_classes = classes;
  spec.flows_per_class = flows;
  spec.packets_per_flow = len;
  spec.seed = 7;
  return generate_trace(spec);
}

void bm_checksum(benchmark::State& state) {
  Rng rng(11);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(state.range(0)));
  for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(256));
  for (auto _ : state) {
    benchmark::DoNotOptimize(internet_checksum(data));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_checksum)->Arg(64)->Arg(1500)->Arg(65536);

void bm_decode(benchmark::State& state) {
  const auto corpus = make_corpus(4, 8, 32);
  for (auto _ : state) {
    for (const auto& raw : corpus.packets) benchmark::DoNotOptimize(decode(raw));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(corpus.packets.size()));
}
BENCHMARK(bm_decode);

void bm_forest_train(benchmark::State& state) {
  Rng rng(23);
  const std::size_t n = 512;
  const std::size_t d = 16;
  Matrix x(n, std::vector<double>(d));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x[i]) v = static_cast<double>(rng.below(1000));
    y[i] = static_cast<int>(i % 4);
  }
  ForestParams params;
  params.n_trees = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_forest(x, y, {"a", "b", "c", "d"}, params, 5));
  }
}
BENCHMARK(bm_forest_train)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
