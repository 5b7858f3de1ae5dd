#include "degenctrl/kernels.hpp"
#include "degenctrl/pde.hpp"
#include "degenctrl/weights.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace degenctrl;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

void BM_WeightedDotSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vector(n, 1), b = random_vector(n, 2), w = random_vector(n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::weighted_dot(a, b, w));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_WeightedDotOmp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vector(n, 1), b = random_vector(n, 2), w = random_vector(n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::omp::weighted_dot(a, b, w));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

// Carleman sweep over s (parallel over the s grid); range(0) is the thread cap, 1 = serial.
void BM_CarlemanRatio(benchmark::State& state) {
    auto p = coeff::make_prototype_profile(0.5, 0.5, 101);
    auto g = mesh::build_grid(200, p);
    const mesh::TimeGrid tg(1.0, 200);
    pde::Solver solver(pde::ProblemSpec{p, coeff::Form::Divergence}, g, tg);
    const auto v = solver.adjoint(pde::random_sine_series(g, 1)).v;
    const auto w = weights::build_degenerate_weight(p, g, coeff::Form::Divergence, 1.0, 0.1);
    const auto s = weights::default_s_grid(w, 1.0, 32);
    const int saved = kernels::thread_cap();
    kernels::set_thread_cap(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(weights::carleman_ratio(v, w, p, tg, s, coeff::Form::Divergence).sup_ratio);
    kernels::set_thread_cap(saved);
}

}  // namespace

BENCHMARK(BM_WeightedDotSerial)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_WeightedDotOmp)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_CarlemanRatio)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
