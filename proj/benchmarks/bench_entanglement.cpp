#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ipw/entanglement_model.hpp"

using namespace ipw;

static void BM_SimulateMeasurements(benchmark::State& state) {
    const auto st = IonPhotonState::werner(0.9);
    std::vector<double> phases;
    for (int k = 0; k < 8; ++k) phases.push_back(2.0 * std::numbers::pi * k / 8);
    const auto settings = x_protocol(phases, static_cast<std::uint64_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_measurements(st, settings, ErrorBudget{}));
    state.SetItemsProcessed(state.iterations() * 8 * state.range(0));
}
BENCHMARK(BM_SimulateMeasurements)->Arg(100'000)->Unit(benchmark::kMillisecond);

static void BM_EstimateFidelity(benchmark::State& state) {
    const auto st = IonPhotonState::werner(0.9);
    std::vector<double> phases;
    for (int k = 0; k < 8; ++k) phases.push_back(2.0 * std::numbers::pi * k / 8);
    const auto z = simulate_measurements(st, z_protocol(std::vector<double>{0.0}, 100'000, 1), ErrorBudget{});
    const auto x = simulate_measurements(st, x_protocol(phases, 100'000, 2), ErrorBudget{});
    for (auto _ : state) benchmark::DoNotOptimize(estimate_fidelity(z, x));
}
BENCHMARK(BM_EstimateFidelity);
