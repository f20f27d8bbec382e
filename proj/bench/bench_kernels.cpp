// Serial reference vs OpenMP kernels on CNN-sized layers.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "cpb/kernels.hpp"
#include "cpb/rng.hpp"

namespace {

using cpb::kernels::Dims;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    cpb::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1, 1);
    return v;
}

struct ConvCase {
    Dims in;
    std::size_t k;
    std::vector<double> x, w, b, y, dy, dx, dw, db;

    ConvCase(std::size_t c, std::size_t side, std::size_t k_)
        : in{c, side, side}, k(k_), x(random_vec(in.size(), 1)), w(random_vec(k * c * 9, 2)), b(random_vec(k, 3)),
          y(k * side * side), dy(random_vec(k * side * side, 4)), dx(in.size()), dw(w.size()), db(k) {}
};

// Args: input channels, side, output channels.
template <bool Parallel>
void BM_conv_forward(benchmark::State& state) {
    ConvCase cc(state.range(0), state.range(1), state.range(2));
    for (auto _ : state) {
        if constexpr (Parallel)
            cpb::kernels::parallel::conv2d_forward(cc.x, cc.in, cc.w, cc.b, cc.k, cc.y);
        else
            cpb::kernels::serial::conv2d_forward(cc.x, cc.in, cc.w, cc.b, cc.k, cc.y);
        benchmark::DoNotOptimize(cc.y.data());
    }
}

template <bool Parallel>
void BM_conv_backward(benchmark::State& state) {
    ConvCase cc(state.range(0), state.range(1), state.range(2));
    for (auto _ : state) {
        if constexpr (Parallel)
            cpb::kernels::parallel::conv2d_backward(cc.x, cc.in, cc.w, cc.k, cc.dy, cc.dx, cc.dw, cc.db);
        else
            cpb::kernels::serial::conv2d_backward(cc.x, cc.in, cc.w, cc.k, cc.dy, cc.dx, cc.dw, cc.db);
        benchmark::DoNotOptimize(cc.dw.data());
    }
}

template <bool Parallel>
void BM_maxpool_forward(benchmark::State& state) {
    const Dims in{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
                  static_cast<std::size_t>(state.range(1))};
    const auto x = random_vec(in.size(), 5);
    std::vector<double> y(in.c * (in.h / 2) * (in.w / 2));
    std::vector<std::uint32_t> arg(y.size());
    for (auto _ : state) {
        if constexpr (Parallel)
            cpb::kernels::parallel::maxpool_forward(x, in, y, arg);
        else
            cpb::kernels::serial::maxpool_forward(x, in, y, arg);
        benchmark::DoNotOptimize(y.data());
    }
}

// Args: inputs, outputs.
template <bool Parallel>
void BM_dense_forward(benchmark::State& state) {
    const auto n_in = static_cast<std::size_t>(state.range(0)), n_out = static_cast<std::size_t>(state.range(1));
    const auto x = random_vec(n_in, 6), w = random_vec(n_in * n_out, 7), b = random_vec(n_out, 8);
    std::vector<double> y(n_out);
    for (auto _ : state) {
        if constexpr (Parallel)
            cpb::kernels::parallel::dense_forward(x, w, b, y);
        else
            cpb::kernels::serial::dense_forward(x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_dense_backward(benchmark::State& state) {
    const auto n_in = static_cast<std::size_t>(state.range(0)), n_out = static_cast<std::size_t>(state.range(1));
    const auto x = random_vec(n_in, 6), w = random_vec(n_in * n_out, 7), dy = random_vec(n_out, 9);
    std::vector<double> dx(n_in), dw(w.size()), db(n_out);
    for (auto _ : state) {
        if constexpr (Parallel)
            cpb::kernels::parallel::dense_backward(x, w, dy, dx, dw, db);
        else
            cpb::kernels::serial::dense_backward(x, w, dy, dx, dw, db);
        benchmark::DoNotOptimize(dw.data());
    }
}

}  // namespace

BENCHMARK(BM_conv_forward<false>)->Args({1, 64, 8})->Args({16, 32, 16})->Args({32, 200, 32});
BENCHMARK(BM_conv_forward<true>)->Args({1, 64, 8})->Args({16, 32, 16})->Args({32, 200, 32});
BENCHMARK(BM_conv_backward<false>)->Args({1, 64, 8})->Args({16, 32, 16});
BENCHMARK(BM_conv_backward<true>)->Args({1, 64, 8})->Args({16, 32, 16});
BENCHMARK(BM_maxpool_forward<false>)->Args({8, 64})->Args({32, 200});
BENCHMARK(BM_maxpool_forward<true>)->Args({8, 64})->Args({32, 200});
BENCHMARK(BM_dense_forward<false>)->Args({128, 1024})->Args({9216, 1024});
BENCHMARK(BM_dense_forward<true>)->Args({128, 1024})->Args({9216, 1024});
BENCHMARK(BM_dense_backward<false>)->Args({128, 1024})->Args({1024, 512});
BENCHMARK(BM_dense_backward<true>)->Args({128, 1024})->Args({1024, 512});

BENCHMARK_MAIN();
