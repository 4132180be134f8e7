// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "memo/generation_loop.hpp"

namespace {

using namespace memo;

void BM_DenoiseClip(benchmark::State& state) {
    GenerationConfig cfg;
    cfg.denoise_steps = static_cast<std::size_t>(state.range(0));
    SeededRng rng(5);
    const GenerationModel model{ToyDenoiser::initialize(DenoiserConfig{}, rng, false), std::nullopt};
    ConditionSet conds;
    conds.audio = rng.normal_matrix(cfg.clip_len, DenoiserConfig{}.audio_dim);
    conds.drop(ConditionKind::reference);
    const auto stream = start_stream(cfg, model.dim());
    for (auto _ : state) benchmark::DoNotOptimize(denoise_clip(cfg, model, conds, EmotionLabel::happy, stream));
}
BENCHMARK(BM_DenoiseClip)->Arg(1)->Arg(20);

void BM_RunStream(benchmark::State& state) {
    GenerationConfig cfg;
    const auto clips = static_cast<std::size_t>(state.range(0));
    SeededRng rng(6);
    const GenerationModel model{ToyDenoiser::initialize(DenoiserConfig{}, rng, false), std::nullopt};
    AudioTimeline audio;
    audio.features = rng.normal_matrix(clips * cfg.clip_len, DenoiserConfig{}.audio_dim);
    const auto emotions = timeline_from_labels(std::vector<EmotionLabel>(clips * cfg.clip_len, EmotionLabel::neutral),
                                               cfg.fps, cfg.clip_len);
    for (auto _ : state) benchmark::DoNotOptimize(run_stream(cfg, model, audio, emotions, clips));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clips));
}
BENCHMARK(BM_RunStream)->Arg(8)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
