// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "memo/emotion.hpp"
#include "memo/memory_attention.hpp"
#include "memo/numerics.hpp"

namespace memo {

enum class Modality : std::uint8_t { video, audio };

/// Tokens with per-token modality tags and validity mask (true = attendable).
/// A joint sequence lists video tokens first, then audio tokens.
struct TokenSequence {
    std::vector<Vector> tokens;
    std::vector<Modality> modality;
    std::vector<bool> mask;

    std::size_t size() const noexcept { return tokens.size(); }
    std::size_t dim() const;
    std::size_t count(Modality m, bool unmasked_only = false) const;
    void validate() const;

    static TokenSequence from_rows(const DenseMatrix& rows, Modality m);
    void push_back(Vector token, Modality m, bool valid = true);
};

TokenSequence concat_video_audio(const TokenSequence& video, const TokenSequence& audio);
/// Tokens of one modality in their original order.
TokenSequence select_modality(const TokenSequence& seq, Modality m);

/// Video queries attend over audio keys/values only (scaled dot-product
/// softmax). Output has one token per video token; masked video tokens come
/// back zeroed with mask=false.
TokenSequence cross_attention(const TokenSequence& video, const TokenSequence& audio, const AttentionProjections& proj);

/// Every unmasked token attends to every unmasked token of either modality.
/// Output is aligned with the input; masked positions are zeroed and flagged.
TokenSequence multimodal_attention(const TokenSequence& joint, const AttentionProjections& proj);

inline constexpr std::size_t kDefaultEmotionEmbeddingDim = 32;

/// One learned vector per label plus a learned null vector for the dropped condition.
struct EmotionEmbeddingTable {
    DenseMatrix table;  // kEmotionCount x dim
    Vector null_embedding;

    std::size_t dim() const noexcept { return table.cols(); }
    Vector lookup(EmotionLabel label) const;

    static EmotionEmbeddingTable random(std::size_t dim, SeededRng& rng, double scale = 1.0);
};

/// Maps an emotion embedding to per-feature (scale, shift). One tanh hidden
/// layer; the output layer is zero at init so modulation starts as identity.
struct AdaLnModulation {
    DenseMatrix w_hidden;  // hidden x embed
    Vector b_hidden;
    DenseMatrix w_out;     // 2*feature x hidden; rows [0, d) scale offset, [d, 2d) shift
    Vector b_out;

    std::size_t embed_dim() const noexcept { return w_hidden.cols(); }
    std::size_t hidden_dim() const noexcept { return w_hidden.rows(); }
    std::size_t feature_dim() const noexcept { return w_out.rows() / 2; }

    /// Returns {1 + s, shift}.
    std::pair<Vector, Vector> modulate(std::span<const double> embedding) const;

    static AdaLnModulation zero_init(std::size_t embed_dim, std::size_t hidden_dim, std::size_t feature_dim, SeededRng& rng);
    static AdaLnModulation random(std::size_t embed_dim, std::size_t hidden_dim, std::size_t feature_dim, SeededRng& rng,
                                  double out_scale);
};

inline constexpr double kLayerNormEps = 1e-5;

/// scale(e) * layer_norm(token) + shift(e), applied to every token.
TokenSequence emotion_adaln(const TokenSequence& x, std::span<const double> embedding, const AdaLnModulation& mod,
                            double eps = kLayerNormEps);

}  // namespace memo
