// Serial reference loop vs the OpenMP replicate loop, plus the sliding window
// inverse against direct per-window inversion.

#include <random>
#include <thread>

#include <benchmark/benchmark.h>

#include "smoothdiff/sim.hpp"
#include "smoothdiff/wintest.hpp"

using namespace smoothdiff;

namespace {

SimScenario bench_scenario() {
  auto s = preset("table2a");
  s.replicates = 8;
  s.n_per_stratum = 2000;
  return s;
}

void BM_ScenarioSerial(benchmark::State& state) {
  const auto s = bench_scenario();
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario_serial(s));
  state.SetItemsProcessed(state.iterations() * s.replicates);
}

void BM_ScenarioOpenMP(benchmark::State& state) {
  const auto s = bench_scenario();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(s, threads));
  state.SetItemsProcessed(state.iterations() * s.replicates);
}

Eigen::MatrixXd spd(int n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::MatrixXd s = a * a.transpose() / n;
  s.diagonal().array() += 1.0;
  return s;
}

void BM_SlidingInverse(benchmark::State& state) {
  const Eigen::MatrixXd v = spd(static_cast<int>(state.range(0)));
  SlidingOptions opts;
  opts.verify = false;
  for (auto _ : state) benchmark::DoNotOptimize(sliding_inverses(v, 4, opts));
}

void BM_DirectWindowInverse(benchmark::State& state) {
  const Eigen::MatrixXd v = spd(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    std::vector<Eigen::MatrixXd> out;
    for (Eigen::Index k = 0; k + 4 <= v.rows(); ++k) out.push_back(v.block(k, k, 4, 4).llt().solve(Eigen::MatrixXd::Identity(4, 4)));
    benchmark::DoNotOptimize(out);
  }
}

void thread_counts(benchmark::internal::Benchmark* b) {
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  for (int t = 1; t <= hw; t *= 2) b->Arg(t);
  if ((hw & (hw - 1)) != 0) b->Arg(hw);
}

}  // namespace

BENCHMARK(BM_ScenarioSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScenarioOpenMP)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SlidingInverse)->Arg(120)->Arg(1000);
BENCHMARK(BM_DirectWindowInverse)->Arg(120)->Arg(1000);

BENCHMARK_MAIN();
