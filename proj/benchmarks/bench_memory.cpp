// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "memo/memory_attention.hpp"

namespace {

using namespace memo;

FrameChunk random_chunk(SeededRng& rng, std::size_t f, std::size_t d) { return rng.normal_matrix(f, d); }

// Cost of absorbing one 16-frame clip into memory.
void BM_MemoryUpdate(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    SeededRng rng(1);
    const auto k = random_chunk(rng, 16, d);
    const auto v = random_chunk(rng, 16, d);
    auto m = memory_init(d, 0.9);
    for (auto _ : state) {
        m = memory_update(m, k, v);
        benchmark::DoNotOptimize(m.m_kv.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_MemoryUpdate)->Arg(4)->Arg(16)->Arg(64);

void BM_LinearAttention(benchmark::State& state) {
    const auto f = static_cast<std::size_t>(state.range(0));
    SeededRng rng(2);
    const auto q = random_chunk(rng, f, 16);
    const auto k = random_chunk(rng, f, 16);
    const auto v = random_chunk(rng, f, 16);
    for (auto _ : state) benchmark::DoNotOptimize(linear_attention(q, k, v));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LinearAttention)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

// Pairwise form over the full history, for comparison with the linear form.
void BM_PairwiseHistory(benchmark::State& state) {
    const auto f = static_cast<std::size_t>(state.range(0));
    SeededRng rng(3);
    std::vector<PastChunk> past;
    for (std::size_t i = 0; i + 16 < f; i += 16) past.push_back({random_chunk(rng, 16, 16), random_chunk(rng, 16, 16)});
    const auto q = random_chunk(rng, 16, 16);
    const auto k = random_chunk(rng, 16, 16);
    const auto v = random_chunk(rng, 16, 16);
    for (auto _ : state) benchmark::DoNotOptimize(full_history_oracle(past, q, k, v, 0.9));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PairwiseHistory)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_MemoryGuidedAttention(benchmark::State& state) {
    const auto f = static_cast<std::size_t>(state.range(0));
    SeededRng rng(4);
    auto m = memory_init(16, 0.9);
    for (std::size_t i = 0; i + 16 < f; i += 16) m = memory_update(m, random_chunk(rng, 16, 16), random_chunk(rng, 16, 16));
    const auto q = random_chunk(rng, 16, 16);
    const auto k = random_chunk(rng, 16, 16);
    const auto v = random_chunk(rng, 16, 16);
    for (auto _ : state) benchmark::DoNotOptimize(memory_guided_attention(q, k, v, m));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MemoryGuidedAttention)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

}  // namespace
