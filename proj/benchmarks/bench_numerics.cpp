#include <benchmark/benchmark.h>

#include "klpriv/numerics.hpp"

using namespace klpriv;

namespace {

Matrix random_psd(std::size_t n) {
    RngStream rng(3, 0);
    return gram_of_rows(gaussian_matrix(n, 2 * n, 1.0, rng));
}

void BM_JacobiEigen(benchmark::State& state) {
    const Matrix k = random_psd(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(jacobi_eigen(k));
}
BENCHMARK(BM_JacobiEigen)->Arg(16)->Arg(64)->Arg(128);

void BM_SolvePsd(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix k = random_psd(n);
    const Vector b(n, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(solve_psd(k, b));
}
BENCHMARK(BM_SolvePsd)->Arg(32)->Arg(256);

}  // namespace
