#include <benchmark/benchmark.h>

#include <sstream>

#include "ipw/photon_statistics.hpp"

using namespace ipw;

namespace {

SourceModel reference_source(const ExperimentTiming& timing) {
    SourceModel s;
    const Picoseconds window{30'000};
    s.dark_rate_hz = dark_rate_for_floor(s, timing, window, 3e-5);
    s.leakage_rate_hz = leakage_rate_for_g2(s, timing, window, 8.1e-5);
    return s;
}

}  // namespace

static void BM_SimulateStream(benchmark::State& state) {
    const ExperimentTiming timing;
    const auto source = reference_source(timing);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_stream(source, timing, state.range(0), 1));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateStream)->Arg(100'000)->Unit(benchmark::kMillisecond);

static void BM_G2Zero(benchmark::State& state) {
    const ExperimentTiming timing;
    const auto stream = simulate_stream(reference_source(timing), timing, 316'000, 1);
    for (auto _ : state) benchmark::DoNotOptimize(g2_zero(stream, timing, Picoseconds{30'000}));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_G2Zero)->Unit(benchmark::kMillisecond);

static void BM_Histogram(benchmark::State& state) {
    const ExperimentTiming timing;
    const auto stream = simulate_stream(reference_source(timing), timing, 316'000, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(coincidence_histogram(stream, timing, Picoseconds{5'000}, 6 * timing.rep_period));
    }
}
BENCHMARK(BM_Histogram)->Unit(benchmark::kMillisecond);

static void BM_BinaryRoundTrip(benchmark::State& state) {
    const ExperimentTiming timing;
    const auto stream = simulate_stream(reference_source(timing), timing, 316'000, 1);
    for (auto _ : state) {
        std::stringstream ss;
        write_binary(ss, stream);
        benchmark::DoNotOptimize(read_binary(ss));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(16 * stream.size()));
}
BENCHMARK(BM_BinaryRoundTrip)->Unit(benchmark::kMillisecond);
