#include <benchmark/benchmark.h>

#include "fdemm/mc_sim.hpp"

using namespace fdemm;

namespace {

const ChangePointSpec& merton() {
    static const auto nu = LevyMeasure::merton(1.0, -0.1, 0.15);
    static const auto spec = ChangePointSpec::build({-0.03, 0.04, nu}, {-0.02, 0.04, nu}, TauLaw::uniform(1.0),
                                                    DivergenceFamily::entropy());
    return spec;
}

const PathSimulator& simulator() {
    static const PathSimulator sim(merton(), scaling_profile(merton()));
    return sim;
}

SimConfig config(benchmark::State& state) {
    SimConfig c;
    c.n_paths = 20000;
    c.n_steps = static_cast<int>(state.range(0));
    c.threads = static_cast<int>(state.range(1));
    return c;
}

}  // namespace

static void BM_TerminalSerial(benchmark::State& state) {
    const SimConfig c = config(state);
    for (auto _ : state) benchmark::DoNotOptimize(terminal_summaries_serial(simulator(), c));
    state.SetItemsProcessed(state.iterations() * c.n_paths);
}
BENCHMARK(BM_TerminalSerial)->Args({1, 1})->Args({64, 1})->Unit(benchmark::kMillisecond);

static void BM_TerminalParallel(benchmark::State& state) {
    const SimConfig c = config(state);
    for (auto _ : state) benchmark::DoNotOptimize(terminal_summaries_parallel(simulator(), c));
    state.SetItemsProcessed(state.iterations() * c.n_paths);
}
BENCHMARK(BM_TerminalParallel)
    ->Args({1, 1})
    ->Args({1, 2})
    ->Args({1, 4})
    ->Args({64, 1})
    ->Args({64, 4})
    ->Unit(benchmark::kMillisecond);

static void BM_SolveMerton(benchmark::State& state) {
    const auto nu = LevyMeasure::merton(1.0, -0.1, 0.15);
    for (auto _ : state) benchmark::DoNotOptimize(solve_minimal({-0.03, 0.04, nu}, DivergenceFamily::entropy()));
}
BENCHMARK(BM_SolveMerton)->Unit(benchmark::kMillisecond);

static void BM_ScalingProfile(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(scaling_profile(merton()));
}
BENCHMARK(BM_ScalingProfile)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
