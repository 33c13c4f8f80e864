#include <benchmark/benchmark.h>

#include "pushsum/sim.hpp"

namespace {

using namespace pushsum;

DirectedGraph ring_with_chords(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    edges.push_back({static_cast<NodeId>((i + 1) % n), i});
    edges.push_back({static_cast<NodeId>((i + 3) % n), i});
  }
  return DirectedGraph(n, edges);
}

// 100 plaintext rounds on an n-node graph.
void BM_Algorithm1Rounds(benchmark::State& state) {
  ExperimentConfig c;
  c.graph = ring_with_chords(static_cast<std::size_t>(state.range(0)));
  c.x0.assign(c.graph.size(), 1.0);
  c.x0[0] = 50.0;
  c.max_rounds = 99;
  c.stop_tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(c).metrics.error.back());
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Algorithm1Rounds)->Arg(5)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

// Encrypted rounds on the reference graph (keys generated once per run).
void BM_Algorithm2Rounds(benchmark::State& state) {
  ExperimentConfig c;
  c.mode = Mode::kAlgorithm2;
  c.max_rounds = 19;
  c.stop_tol = 0.0;
  c.crypto.key_bits = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(c).crypto.encrypt.count);
}
BENCHMARK(BM_Algorithm2Rounds)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
