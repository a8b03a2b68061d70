#include <benchmark/benchmark.h>

#include <vector>

#include "ipw/bloch_dynamics.hpp"

using namespace ipw;

static void BM_DoubleExcitation(benchmark::State& state) {
    const auto atom = AtomSpec::barium138();
    const double t_p = static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(double_excitation_error(atom, t_p));
}
BENCHMARK(BM_DoubleExcitation)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_PulseScan(benchmark::State& state) {
    const auto atom = AtomSpec::barium138();
    const std::vector<double> grid = {0.01, 0.1, 0.5, 1, 2, 5, 10, 20, 30, 50, 100};
    for (auto _ : state) benchmark::DoNotOptimize(scan_pulse_durations(atom, grid));
}
BENCHMARK(BM_PulseScan)->Unit(benchmark::kMillisecond);
