// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Autoregressive clip generation. Each clip is denoised from pure noise with
// uniform Euler steps of the rectified flow, using emotion-conditioned CFG
// and memory-guided attention over everything generated so far. After a
// clip is emitted its projected keys/values are folded into the memory.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "memo/emotion.hpp"
#include "memo/memory_attention.hpp"
#include "memo/rectified_flow.hpp"
#include "memo/toy_denoiser.hpp"

namespace memo {

/// Which temporal context the denoiser sees.
enum class MemoryAblation {
    none,       // full decayed memory
    off,        // no past context at all
    last1clip,  // memory ignored; last clip's keys/values joined undecayed
};

std::string_view to_string(MemoryAblation a) noexcept;
MemoryAblation parse_memory_ablation(std::string_view name);

struct GenerationConfig {
    double fps = 30.0;
    std::size_t clip_len = 16;
    double cfg_scale = kDefaultCfgScale;
    double gamma = 0.9;
    std::size_t denoise_steps = 20;
    double t_start = 0.999;
    std::uint64_t seed = 1;
    MemoryAblation ablation = MemoryAblation::none;

    void validate() const;
};

/// The denoiser plus the projections used to write finished frames into
/// memory. Without separate memory projections the denoiser's own W_k/W_v
/// are shared.
struct GenerationModel {
    ToyDenoiser denoiser;
    std::optional<AttentionProjections> memory_projections;

    std::size_t dim() const noexcept { return denoiser.config().latent_dim; }
    ProjectedChunk project_for_memory(const FrameChunk& clip) const;
};

struct ClipTrace {
    std::size_t clip_index = 0;
    EmotionLabel emotion = EmotionLabel::neutral;
    /// Frobenius norm of the past-context matrix the clip was generated with.
    double memory_frobenius_norm = 0.0;
    double mean_abs_feature = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> denoise_residuals;
};

struct StreamState {
    MemoryState memory;
    std::size_t clips_emitted = 0;
    FrameChunk last_clip_features;
    std::vector<ClipTrace> trace;
};

StreamState start_stream(const GenerationConfig& config, std::size_t dim);

/// Seed of the initial noise for the clip at `clip_index`.
std::uint64_t clip_seed(const GenerationConfig& config, std::size_t clip_index);

/// Past context the next clip sees under the configured ablation, or nullopt.
std::optional<MemoryState> effective_memory(const GenerationConfig& config, const StreamState& state,
                                            const GenerationModel& model);

/// One clip of `clip_len` frames. Starting from z ~ N(0, I) at t_start,
/// each of the uniform steps t -> t' does
///
///   eps = cfg_blend(eps(z, t | e), eps(z, t), w)
///   z  += (t' - t) (eps - z) / (1 - t)
///
/// Throws NonFiniteError naming the step if a value stops being finite.
FrameChunk denoise_clip(const GenerationConfig& config, const GenerationModel& model, const ConditionSet& conditions,
                        EmotionLabel emotion, const StreamState& state, std::vector<double>* residuals = nullptr);

/// Folds the finished clip into memory and appends its trace record.
StreamState advance(const StreamState& state, const FrameChunk& new_clip, const GenerationConfig& config,
                    const GenerationModel& model, EmotionLabel emotion, std::vector<double> residuals = {});

struct StreamResult {
    std::vector<FrameChunk> clips;
    StreamState state;
};

/// Generates n_clips clips, taking audio rows and the per-clip emotion from
/// the timelines. The emotion subsegments must start at clip boundaries.
StreamResult run_stream(const GenerationConfig& config, const GenerationModel& model, const AudioTimeline& audio,
                        const EmotionTimeline& emotions, std::size_t n_clips, const Vector& reference = {});

/// One JSON object per line: {clip_index, emotion, memory_frobenius_norm, mean_abs_feature, seed}.
void write_trace_jsonl(std::ostream& out, const std::vector<ClipTrace>& trace);

/// Binary tensor file: "MEMOCLIP" magic, u64 n_clips, clip_len, d, then
/// n_clips*clip_len*d little-endian doubles.
void write_clip_dump(std::ostream& out, const std::vector<FrameChunk>& clips);
std::vector<FrameChunk> read_clip_dump(std::istream& in);
/// JSON variant {n_clips, clip_len, d, data}.
void write_clip_dump_json(std::ostream& out, const std::vector<FrameChunk>& clips);

}  // namespace memo
