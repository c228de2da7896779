#include <benchmark/benchmark.h>

#include "klpriv/estimator.hpp"

using namespace klpriv;

namespace {

void BM_NoisyGdStep(benchmark::State& state) {
    const NetArch arch = NetArch::uniform(32, static_cast<std::size_t>(state.range(0)), 6, 1);
    RngStream rng(4, 0);
    ParamVector w = sample_init(arch, init_betas(InitScheme::lecun(), arch), rng);
    const Vector grad(w.size(), 1e-3);
    for (auto _ : state) w = noisy_gd_step(w, grad, 1e-3, 1e-2, rng);
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * w.size()));
}
BENCHMARK(BM_NoisyGdStep)->Arg(64)->Arg(256);

void BM_KlTraceStep(benchmark::State& state) {
    RngStream data_rng(5, 0);
    const Dataset data = synth_sphere(64, 32, data_rng, RandomSign{});
    const NeighborSet nb = enumerate_neighbors(data, NeighborNotion::RemoveOne);
    const DnnModel model{NetArch::uniform(32, static_cast<std::size_t>(state.range(0)), 6, 1), InitScheme::lecun()};
    TrainConfig cfg;
    cfg.eta = 1e-3;
    cfg.sigma2 = 1e-2;
    cfg.steps = 1;
    cfg.runs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(run_kl_trace(model, data, nb, cfg, 0));
}
BENCHMARK(BM_KlTraceStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
