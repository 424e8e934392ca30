// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
// Parallel attention kernel against the serial reference, plus the two
// Monte-Carlo hot paths. The OpenMP kernels only fork above a size cutoff, so
// the small shapes double as overhead checks.
#include <cstdint>

#include "qaq/attention.hpp"
#include "qaq/mc_oracle.hpp"
#include "qaq/reference.hpp"
#include "qaq/rng.hpp"
#include "qaq/tensor.hpp"

namespace {

struct Problem {
    qaq::Tensor1D q;
    qaq::Tensor2D k;
    qaq::Tensor2D v;
};

Problem make_problem(size_t t, size_t d) {
    qaq::rng::Stream gen(42, t * 1000 + d);
    Problem p{qaq::Tensor1D(d), qaq::Tensor2D(t, d), qaq::Tensor2D(t, d)};
    for (size_t i = 0; i < d; ++i) {
        p.q[i] = gen.normal();
    }
    for (size_t r = 0; r < t; ++r) {
        for (size_t i = 0; i < d; ++i) {
            p.k.at(r, i) = gen.normal();
            p.v.at(r, i) = gen.normal();
        }
    }
    return p;
}

} // namespace

#ifndef QAQ_BENCH_FALLBACK

#include <benchmark/benchmark.h>

static void bench_attention_parallel(benchmark::State& state) {
    const auto t = static_cast<size_t>(state.range(0));
    const auto d = static_cast<size_t>(state.range(1));
    Problem p = make_problem(t, d);
    for (auto _ : state) {
        auto out = qaq::attention_forward(p.q, p.k, p.v);
        benchmark::DoNotOptimize(out.x.data.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(t * d));
}

static void bench_attention_serial(benchmark::State& state) {
    const auto t = static_cast<size_t>(state.range(0));
    const auto d = static_cast<size_t>(state.range(1));
    Problem p = make_problem(t, d);
    for (auto _ : state) {
        auto x = qaq::ref::attention_naive(p.q, p.k, p.v);
        benchmark::DoNotOptimize(x.data.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(t * d));
}

static void bench_mc_variance_x(benchmark::State& state) {
    qaq::Tensor1D s{0.4, 0.3, 0.2, 0.1};
    std::vector<double> sigma{0.1, 0.2, 0.05, 0.15};
    for (auto _ : state) {
        auto r = qaq::mc_variance_x(s, sigma, static_cast<uint64_t>(state.range(0)), 7);
        benchmark::DoNotOptimize(r.empirical);
    }
}

BENCHMARK(bench_attention_parallel)
    ->Args({64, 16})
    ->Args({512, 64})
    ->Args({2048, 128});
BENCHMARK(bench_attention_serial)->Args({64, 16})->Args({512, 64})->Args({2048, 128});
BENCHMARK(bench_mc_variance_x)->Arg(1 << 16)->Arg(1 << 18);

BENCHMARK_MAIN();

#else // QAQ_BENCH_FALLBACK

#include <chrono>
#include <cstdio>

namespace {

template <typename Fn>
double time_per_call(Fn&& fn, int iters) {
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) {
        fn();
    }
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::micro>(stop - start).count() / iters;
}

} // namespace

int main() {
    volatile double sink = 0.0;
    for (auto [t, d, iters] : {std::tuple<size_t, size_t, int>{64, 16, 2000},
                               {512, 64, 200},
                               {2048, 128, 20}}) {
        Problem p = make_problem(t, d);
        const double par = time_per_call(
            [&] { sink = qaq::attention_forward(p.q, p.k, p.v).x[0]; }, iters);
        const double ser =
            time_per_call([&] { sink = qaq::ref::attention_naive(p.q, p.k, p.v)[0]; }, iters);
        std::printf("attention T=%-5zu D=%-4zu parallel %10.2f us   serial %10.2f us   speedup %.2fx\n",
                    t, d, par, ser, ser / par);
    }
    (void)sink;
    return 0;
}

#endif
