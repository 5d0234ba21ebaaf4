// OpenMP smoothers against the serial full-sort reference.
#include <benchmark/benchmark.h>

#include <vector>

#include "semiiv/rng.hpp"
#include "semiiv/smoothers.hpp"

namespace {

struct Data {
  std::vector<double> x1, x2, y;
};

Data make(std::size_t n) {
  semiiv::RandomStream s(42, n);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    d.x1.push_back(s.uniform(0.0, 5.0));
    d.x2.push_back(s.uniform(0.0, 2.0));
    d.y.push_back(d.x1.back() * d.x1.back() + d.x2.back() + s.normal(0.0, 0.5));
  }
  return d;
}

void univariate_parallel(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(semiiv::fit_univariate(d.x1, d.y, {}).effective_df());
}

void univariate_serial(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(semiiv::reference::smooth_univariate_serial(d.x1, d.y, {}).fitted);
}

void surface_parallel(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(semiiv::fit_surface(d.x1, d.x2, d.y, {}).effective_df());
}

void surface_serial(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(semiiv::reference::smooth_surface_serial(d.x1, d.x2, d.y, {}).fitted);
  }
}

}  // namespace

BENCHMARK(univariate_parallel)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(univariate_serial)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(surface_parallel)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(surface_serial)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
