#include <benchmark/benchmark.h>

#include <cmath>

#include "ipw/radiation_geometry.hpp"

using namespace ipw;

static void BM_CollectionCircular(benchmark::State& state) {
    const auto spec = ApertureSpec::from_numerical_aperture(0.6);
    const double tol = std::pow(10.0, -static_cast<double>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(collection_probabilities(spec, tol));
}
BENCHMARK(BM_CollectionCircular)->Arg(6)->Arg(10)->Arg(12);

static void BM_CollectionSlit(benchmark::State& state) {
    const auto spec = ApertureSpec::slit(std::asin(0.6), 0.2524098);
    for (auto _ : state) benchmark::DoNotOptimize(collection_probabilities(spec, 1e-10));
}
BENCHMARK(BM_CollectionSlit);

static void BM_TradeoffCurve(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(tradeoff_curve(std::asin(0.6), static_cast<int>(state.range(0))));
}
BENCHMARK(BM_TradeoffCurve)->Arg(11)->Arg(41)->Unit(benchmark::kMillisecond);
