// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Desk-scale stand-in for the noise predictor eps_theta.
//
// Per frame i of a clip (width d = latent dim):
//
//   c_i   = [z_i; audio_i; reference]
//   h_i   = W_in [c_i; t; t c_i] + b_in                    time-modulated input
//   x_i   = scale(e) * layer_norm(h_i) + shift(e)          emotion AdaLN
//   y_i   = h_i + memory_guided_attention(W_q x, W_k x, W_v x, M)_i
//   u_i   = W_out y_i + b_out
//   eps_i = z_i + (1 - t) u_i
//
// The last line makes lambda(t) ||eps - eps_theta||^2 equal to
// ||(eps - z0) - u||^2, so u is a velocity and the weighted loss stays
// bounded as t -> 1.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "memo/memory_attention.hpp"
#include "memo/multimodal_attention.hpp"
#include "memo/numerics.hpp"
#include "memo/rectified_flow.hpp"

namespace memo {

struct DenoiserConfig {
    std::size_t latent_dim = 4;
    std::size_t audio_dim = 4;
    std::size_t emotion_dim = 8;
    std::size_t modulation_hidden = 8;

    /// Width of [z; audio; reference].
    std::size_t condition_dim() const noexcept { return 2 * latent_dim + audio_dim; }
    std::size_t input_dim() const noexcept { return 2 * condition_dim() + 1; }
    void validate() const;
};

/// Parameter groups, in flattening order.
enum class ParamGroup { input, emotion, modulation, attention, output, null_conditions };

std::string_view to_string(ParamGroup g) noexcept;
ParamGroup parse_param_group(std::string_view name);

struct DenoiserParams {
    DenseMatrix w_in;  // d x input_dim
    Vector b_in;
    EmotionEmbeddingTable emotion;
    AdaLnModulation modulation;
    AttentionProjections attention;
    DenseMatrix w_out;  // d x d
    Vector b_out;
    Vector null_audio;
    Vector null_reference;

    /// Same-shaped zero tensor set, used for gradients.
    DenoiserParams zeros_like() const;
    std::size_t size() const;
    Vector flatten() const;
    void assign(std::span<const double> flat);

    /// Calls fn(group, storage) for every tensor in flattening order.
    void for_each(const std::function<void(ParamGroup, std::vector<double>&)>& fn);
    void for_each(const std::function<void(ParamGroup, const std::vector<double>&)>& fn) const;
};

class ToyDenoiser {
public:
    ToyDenoiser(DenoiserConfig config, DenoiserParams params);

    /// Random init. With `zero_init_modulation` the AdaLN output layer starts
    /// at zero, so emotion has no effect until trained.
    static ToyDenoiser initialize(const DenoiserConfig& config, SeededRng& rng, bool zero_init_modulation = true);

    const DenoiserConfig& config() const noexcept { return config_; }
    const DenoiserParams& params() const noexcept { return params_; }
    DenoiserParams& params() noexcept { return params_; }

    /// Noise prediction for every frame of `z_t`. `memory` may be null.
    FrameChunk predict(const FrameChunk& z_t, double t, const ConditionSet& conds, const MemoryState* memory) const;

    /// Velocity head u (see file comment).
    FrameChunk velocity(const FrameChunk& z_t, double t, const ConditionSet& conds, const MemoryState* memory) const;

    /// flow_loss of the prediction against `eps`; if `grad` is non-null its
    /// tensors are incremented by d(loss)/d(params). The memory is treated
    /// as a constant input.
    double loss_and_gradient(const FrameChunk& z_t, const FrameChunk& eps, double t, const ConditionSet& conds,
                             const MemoryState* memory, LossReduction reduction, DenoiserParams* grad) const;

    /// Projected keys and values of finished frames, for memory updates.
    ProjectedChunk project_frames(const FrameChunk& frames) const;

    std::string to_json() const;
    static ToyDenoiser from_json(std::string_view text);

private:
    struct Forward;
    Forward forward(const FrameChunk& z_t, double t, const ConditionSet& conds, const MemoryState* memory) const;
    void check_inputs(const FrameChunk& z_t, double t, const ConditionSet& conds, const MemoryState* memory) const;

    DenoiserConfig config_;
    DenoiserParams params_;
};

}  // namespace memo
