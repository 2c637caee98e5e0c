// OpenMP kernels against their serial references. Run with
// OMP_NUM_THREADS / AAD_JOBS set to compare thread counts.

#include <random>

#include <benchmark/benchmark.h>

#include "aad/evaluation.hpp"
#include "aad/features.hpp"
#include "aad/kernels.hpp"
#include "aad/reference.hpp"
#include "aad/rng.hpp"

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed)
{
    aad::Rng rng = aad::make_rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

Eigen::MatrixXd noise(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    const auto v = noise(static_cast<std::size_t>(r * c), seed);
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), r, c);
}

template <bool Parallel>
void fir(benchmark::State& state)
{
    const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
    const auto h = noise(257, 2);
    std::vector<double> out(x.size());
    for (auto _ : state) {
        if constexpr (Parallel) aad::kernels::fir_filter(h, x, 128, out);
        else aad::reference::fir_filter(h, x, 128, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void xcorr(benchmark::State& state)
{
    const auto a = noise(static_cast<std::size_t>(state.range(0)), 3);
    const auto b = noise(static_cast<std::size_t>(state.range(0)), 4);
    for (auto _ : state) {
        auto s = Parallel ? aad::kernels::xcorr_scan(a, b, 512) : aad::reference::xcorr_scan(a, b, 512);
        benchmark::DoNotOptimize(s.data());
    }
}

template <bool Parallel>
void gammatone(benchmark::State& state)
{
    const auto bank = aad::GammatoneBank::make(16000.0);
    const auto x = noise(static_cast<std::size_t>(state.range(0)), 5);
    for (auto _ : state) {
        auto m = Parallel ? aad::kernels::gammatone_bank(x, bank.poles, bank.gains)
                          : aad::reference::gammatone_bank(x, bank.poles, bank.gains);
        benchmark::DoNotOptimize(m.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void blocks(benchmark::State& state)
{
    const Eigen::MatrixXd m = noise(state.range(0), 161, 6);
    const aad::MatrixSource src(m, 1);
    const auto ranges = aad::split_blocks(m.rows(), 640);
    for (auto _ : state) {
        auto s = Parallel ? aad::kernels::block_stats(src, ranges) : aad::reference::block_stats(src, ranges);
        benchmark::DoNotOptimize(s.data());
    }
}

template <bool Parallel>
void shifted(benchmark::State& state)
{
    const auto x = noise(static_cast<std::size_t>(state.range(0)), 7);
    const Eigen::MatrixXd y = noise(2, state.range(0), 8);
    Eigen::MatrixXd xx, xy;
    if constexpr (Parallel) {
        const aad::kernels::ShiftedLagStats stats(x, y, -64, 96);
        std::int64_t shift = 320;
        for (auto _ : state) {
            stats.compute(shift++, xx, xy);
            benchmark::DoNotOptimize(xx.data());
        }
    } else {
        std::int64_t shift = 320;
        for (auto _ : state) {
            aad::reference::shifted_lag_stats(x, y, -64, 96, shift++, xx, xy);
            benchmark::DoNotOptimize(xx.data());
        }
    }
}

template <bool Parallel>
void sign_flip(benchmark::State& state)
{
    const Eigen::MatrixXd trfs = noise(2 * 160, 18, 9);
    for (auto _ : state) {
        auto s = Parallel ? aad::kernels::sign_flip_max_clusters(trfs, 2, 0.05, static_cast<int>(state.range(0)), 1)
                          : aad::reference::sign_flip_max_clusters(trfs, 2, 0.05, static_cast<int>(state.range(0)), 1);
        benchmark::DoNotOptimize(s.data());
    }
}

} // namespace

BENCHMARK(fir<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(fir<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(xcorr<false>)->Arg(1 << 14);
BENCHMARK(xcorr<true>)->Arg(1 << 14);
BENCHMARK(gammatone<false>)->Arg(1 << 16);
BENCHMARK(gammatone<true>)->Arg(1 << 16);
BENCHMARK(blocks<false>)->Arg(9600);
BENCHMARK(blocks<true>)->Arg(9600);
BENCHMARK(shifted<false>)->Arg(9600);
BENCHMARK(shifted<true>)->Arg(9600);
BENCHMARK(sign_flip<false>)->Arg(1000);
BENCHMARK(sign_flip<true>)->Arg(1000);

BENCHMARK_MAIN();
