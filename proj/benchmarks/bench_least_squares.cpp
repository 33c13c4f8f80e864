#include <benchmark/benchmark.h>

#include "pushsum/sim.hpp"

namespace {

using namespace pushsum;

AdversaryView reference_view(Round m) {
  const DirectedGraph g = reference_graph();
  SeededSchedule schedule(g, {1, 0.01, 10.0}, 5);
  RunOptions opt;
  opt.iterations = m + 1;
  const std::vector<double> x0 = {40, 15, 20, 25, 30};
  const ExecutionTrace t = run_synchronous(g, x0, schedule, opt);
  const std::vector<NodeId> members = {1, 2, 3};
  return collect_view(t, members, 1);
}

void BM_BuildAndSolve(benchmark::State& state) {
  const Round m = static_cast<Round>(state.range(0));
  const AdversaryView view = reference_view(m);
  for (auto _ : state) benchmark::DoNotOptimize(attack_least_squares(view, 0, m));
}
BENCHMARK(BM_BuildAndSolve)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
