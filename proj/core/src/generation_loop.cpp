// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/generation_loop.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace memo {

namespace {

constexpr char kClipMagic[8] = {'M', 'E', 'M', 'O', 'C', 'L', 'I', 'P'};

void write_u64(std::ostream& out, std::uint64_t x) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("clip dump: truncated");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return x;
}

double mean_abs(const FrameChunk& c) {
    double s = 0.0;
    for (double x : c.data()) s += std::abs(x);
    return c.data().empty() ? 0.0 : s / static_cast<double>(c.data().size());
}

// Undecayed sum over one clip, shaped like a memory so it can be joined the same way.
MemoryState clip_context(const ProjectedChunk& kv, double gamma) {
    MemoryState m = memory_init(kv.k.cols(), gamma);
    for (std::size_t j = 0; j < kv.k.rows(); ++j) {
        const Vector pk = feature_map(kv.k.row(j));
        add_outer(m.m_kv, pk, kv.v.row(j));
        for (std::size_t r = 0; r < pk.size(); ++r) m.m_k[r] += pk[r];
    }
    m.frames_absorbed = kv.k.rows();
    return m;
}

}  // namespace

std::string_view to_string(MemoryAblation a) noexcept {
    switch (a) {
        case MemoryAblation::none: return "none";
        case MemoryAblation::off: return "off";
        case MemoryAblation::last1clip: return "last1clip";
    }
    return "?";
}

MemoryAblation parse_memory_ablation(std::string_view name) {
    if (name == "none") return MemoryAblation::none;
    if (name == "off") return MemoryAblation::off;
    if (name == "last1clip") return MemoryAblation::last1clip;
    throw std::invalid_argument("unknown memory ablation '" + std::string(name) + "' (expected none, off or last1clip)");
}

void GenerationConfig::validate() const {
    if (clip_len == 0) throw std::invalid_argument("generation: clip_len must be >= 1");
    if (denoise_steps == 0) throw std::invalid_argument("generation: denoise_steps must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("generation: gamma must lie in (0, 1)");
    if (!(t_start > 0.0 && t_start < 1.0)) throw std::invalid_argument("generation: t_start must lie in (0, 1)");
    if (!(fps > 0.0)) throw std::invalid_argument("generation: fps must be > 0");
    if (!std::isfinite(cfg_scale)) throw std::invalid_argument("generation: cfg_scale must be finite");
}

ProjectedChunk GenerationModel::project_for_memory(const FrameChunk& clip) const {
    if (memory_projections) return project(clip, *memory_projections);
    return denoiser.project_frames(clip);
}

StreamState start_stream(const GenerationConfig& config, std::size_t dim) {
    config.validate();
    StreamState s;
    s.memory = memory_init(dim, config.gamma);
    return s;
}

std::uint64_t clip_seed(const GenerationConfig& config, std::size_t clip_index) {
    return SeededRng(config.seed).derive(clip_index).seed();
}

std::optional<MemoryState> effective_memory(const GenerationConfig& config, const StreamState& state,
                                            const GenerationModel& model) {
    switch (config.ablation) {
        case MemoryAblation::none:
            return state.memory;
        case MemoryAblation::off:
            return std::nullopt;
        case MemoryAblation::last1clip:
            if (state.last_clip_features.empty()) return std::nullopt;
            return clip_context(model.project_for_memory(state.last_clip_features), config.gamma);
    }
    return std::nullopt;
}

FrameChunk denoise_clip(const GenerationConfig& config, const GenerationModel& model, const ConditionSet& conditions,
                        EmotionLabel emotion, const StreamState& state, std::vector<double>* residuals) {
    config.validate();
    const std::size_t d = model.dim();
    if (!conditions.is_dropped(ConditionKind::audio) && conditions.audio.rows() != config.clip_len) {
        throw std::invalid_argument("denoise_clip: audio segment has " + std::to_string(conditions.audio.rows()) +
                                    " frames, expected clip_len " + std::to_string(config.clip_len));
    }
    if (state.memory.dim() != d) throw std::invalid_argument("denoise_clip: stream memory dim != model dim");

    std::optional<MemoryState> memory;
    if (!conditions.is_dropped(ConditionKind::past_frames)) memory = effective_memory(config, state, model);
    const MemoryState* mem = memory ? &*memory : nullptr;

    ConditionSet cond = conditions;
    cond.emotion = emotion;
    cond.restore(ConditionKind::emotion);
    ConditionSet uncond = cond;
    uncond.drop(ConditionKind::emotion);

    SeededRng rng(clip_seed(config, state.clips_emitted));
    FrameChunk z = rng.normal_matrix(config.clip_len, d);
    const double n = static_cast<double>(config.denoise_steps);
    for (std::size_t k = 0; k < config.denoise_steps; ++k) {
        const double t = config.t_start * (1.0 - static_cast<double>(k) / n);
        const double t_next = config.t_start * (1.0 - static_cast<double>(k + 1) / n);
        const FrameChunk eps_c = model.denoiser.predict(z, t, cond, mem);
        Vector eps = eps_c.data();
        if (config.cfg_scale != 0.0) {
            const FrameChunk eps_u = model.denoiser.predict(z, t, uncond, mem);
            eps = cfg_blend(eps_c.data(), eps_u.data(), config.cfg_scale);
        }
        double step_sq = 0.0;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            const double delta = (t_next - t) * (eps[i] - z.data()[i]) / (1.0 - t);
            z.data()[i] += delta;
            step_sq += delta * delta;
        }
        if (!all_finite(z.data())) {
            throw NonFiniteError("denoise_clip: non-finite latent at step " + std::to_string(k) + " (t=" +
                                 std::to_string(t) + ", clip " + std::to_string(state.clips_emitted) + ")");
        }
        if (residuals != nullptr) residuals->push_back(std::sqrt(step_sq));
    }
    return z;
}

StreamState advance(const StreamState& state, const FrameChunk& new_clip, const GenerationConfig& config,
                    const GenerationModel& model, EmotionLabel emotion, std::vector<double> residuals) {
    if (new_clip.rows() != config.clip_len || new_clip.cols() != state.memory.dim()) {
        throw std::invalid_argument("advance: clip must be clip_len x d");
    }
    ClipTrace rec;
    rec.clip_index = state.clips_emitted;
    rec.emotion = emotion;
    const auto context = effective_memory(config, state, model);
    rec.memory_frobenius_norm = context ? frobenius_norm(context->m_kv) : 0.0;
    rec.mean_abs_feature = mean_abs(new_clip);
    rec.seed = clip_seed(config, state.clips_emitted);
    rec.denoise_residuals = std::move(residuals);

    StreamState next = state;
    const ProjectedChunk kv = model.project_for_memory(new_clip);
    next.memory = memory_update(state.memory, kv.k, kv.v);
    next.clips_emitted += 1;
    next.last_clip_features = new_clip;
    next.trace.push_back(std::move(rec));
    return next;
}

StreamResult run_stream(const GenerationConfig& config, const GenerationModel& model, const AudioTimeline& audio,
                        const EmotionTimeline& emotions, std::size_t n_clips, const Vector& reference) {
    config.validate();
    const std::size_t needed = n_clips * config.clip_len;
    if (audio.frames() < needed) {
        throw std::invalid_argument("run_stream: audio timeline has " + std::to_string(audio.frames()) +
                                    " frames, need " + std::to_string(needed));
    }
    if (emotions.per_frame_labels.size() < needed) {
        throw std::invalid_argument("run_stream: emotion timeline has " +
                                    std::to_string(emotions.per_frame_labels.size()) + " frames, need " +
                                    std::to_string(needed));
    }
    if (audio.features.cols() != model.denoiser.config().audio_dim) {
        throw std::invalid_argument("run_stream: audio feature dim != model audio_dim");
    }

    StreamResult result;
    result.state = start_stream(config, model.dim());
    for (std::size_t c = 0; c < n_clips; ++c) {
        const std::size_t start = c * config.clip_len;
        const Subsegment* seg = nullptr;
        for (const auto& s : emotions.subsegments)
            if (s.start_frame == start) seg = &s;
        if (seg == nullptr) {
            throw std::invalid_argument("run_stream: no emotion subsegment starts at clip boundary frame " +
                                        std::to_string(start));
        }

        ConditionSet conds;
        conds.audio = DenseMatrix(config.clip_len, audio.features.cols());
        for (std::size_t i = 0; i < config.clip_len; ++i) {
            const auto src = audio.features.row(start + i);
            std::copy(src.begin(), src.end(), conds.audio.row(i).begin());
        }
        if (reference.empty()) {
            conds.drop(ConditionKind::reference);
        } else {
            conds.reference = reference;
        }

        std::vector<double> residuals;
        FrameChunk clip = denoise_clip(config, model, conds, seg->label, result.state, &residuals);
        result.state = advance(result.state, clip, config, model, seg->label, std::move(residuals));
        result.clips.push_back(std::move(clip));
    }
    return result;
}

void write_trace_jsonl(std::ostream& out, const std::vector<ClipTrace>& trace) {
    for (const auto& r : trace) {
        nlohmann::ordered_json j;
        j["clip_index"] = r.clip_index;
        j["emotion"] = to_string(r.emotion);
        j["memory_frobenius_norm"] = r.memory_frobenius_norm;
        j["mean_abs_feature"] = r.mean_abs_feature;
        j["seed"] = r.seed;
        out << j.dump() << '\n';
    }
}

void write_clip_dump(std::ostream& out, const std::vector<FrameChunk>& clips) {
    const std::size_t clip_len = clips.empty() ? 0 : clips.front().rows();
    const std::size_t d = clips.empty() ? 0 : clips.front().cols();
    out.write(kClipMagic, sizeof kClipMagic);
    write_u64(out, clips.size());
    write_u64(out, clip_len);
    write_u64(out, d);
    for (const auto& c : clips) {
        if (c.rows() != clip_len || c.cols() != d) throw std::invalid_argument("write_clip_dump: ragged clips");
        for (double x : c.data()) write_u64(out, std::bit_cast<std::uint64_t>(x));
    }
}

std::vector<FrameChunk> read_clip_dump(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kClipMagic)) throw std::runtime_error("clip dump: bad magic");
    const auto n = read_u64(in);
    const auto clip_len = read_u64(in);
    const auto d = read_u64(in);
    std::vector<FrameChunk> clips;
    for (std::uint64_t c = 0; c < n; ++c) {
        FrameChunk chunk(clip_len, d);
        for (auto& x : chunk.data()) x = std::bit_cast<double>(read_u64(in));
        clips.push_back(std::move(chunk));
    }
    return clips;
}

void write_clip_dump_json(std::ostream& out, const std::vector<FrameChunk>& clips) {
    nlohmann::ordered_json j;
    j["n_clips"] = clips.size();
    j["clip_len"] = clips.empty() ? 0 : clips.front().rows();
    j["d"] = clips.empty() ? 0 : clips.front().cols();
    auto& data = j["data"] = nlohmann::json::array();
    for (const auto& c : clips) data.push_back(c.data());
    out << j.dump() << '\n';
}

}  // namespace memo
