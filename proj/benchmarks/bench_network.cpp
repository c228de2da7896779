#include <benchmark/benchmark.h>

#include "klpriv/network.hpp"

using namespace klpriv;

namespace {

void BM_ForwardBackward(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const NetArch arch = NetArch::uniform(32, m, 6, 1);
    RngStream rng(1, 0);
    const ParamVector w = sample_init(arch, init_betas(InitScheme::he(), arch), rng);
    Vector x(32);
    for (double& v : x) v = rng.normal();
    const Vector y{1.0};
    for (auto _ : state) benchmark::DoNotOptimize(per_example_grad(w, x, y, LossKind::LogisticSingle));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * w.size()));
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64)->Arg(256);

void BM_OutputJacobian(benchmark::State& state) {
    const NetArch arch = NetArch::uniform(16, static_cast<std::size_t>(state.range(0)), 3, 4);
    RngStream rng(2, 0);
    const ParamVector w = sample_init(arch, init_betas(InitScheme::lecun(), arch), rng);
    const Vector x(16, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(output_jacobian(w, x));
}
BENCHMARK(BM_OutputJacobian)->Arg(32)->Arg(128);

}  // namespace
