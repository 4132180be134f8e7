// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Memory-guided linear attention.
//
// Within a clip, frame i attends to every frame j of the clip through a
// positive feature map phi (softmax over the feature axis):
//
//     out_i = phi(q_i)^T (sum_j phi(k_j) v_j^T) / (phi(q_i)^T sum_j phi(k_j))
//
// Frames from earlier clips are folded into a constant-size memory
//
//     M_kv = sum_p gamma^age(p) phi(k_p) v_p^T,   M_k = sum_p gamma^age(p) phi(k_p)
//
// where the newest past frame has age 1. Absorbing a chunk of `a` frames
// scales the old memory by gamma^a and adds the chunk with weights
// gamma^1 (newest) ... gamma^a (oldest). The current clip enters the
// numerator and denominator undecayed.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memo/numerics.hpp"

namespace memo {

/// One frame per row, one feature per column; rows ordered oldest to newest.
using FrameChunk = DenseMatrix;

/// Added to every attention denominator. The denominators are positive by
/// construction; this only matters when phi underflows.
inline constexpr double kDenominatorGuard = 1e-30;

struct AttentionProjections {
    DenseMatrix w_q;
    DenseMatrix w_k;
    DenseMatrix w_v;

    std::size_t dim() const noexcept { return w_q.rows(); }
    void validate() const;

    static AttentionProjections identity(std::size_t d);
    static AttentionProjections random(std::size_t d, SeededRng& rng, double scale);
};

struct ProjectedChunk {
    FrameChunk q;
    FrameChunk k;
    FrameChunk v;
};

/// Applies W_q, W_k, W_v to every frame (row) of `features`.
ProjectedChunk project(const FrameChunk& features, const AttentionProjections& proj);

/// phi: softmax across the feature dimension of a single vector.
Vector feature_map(std::span<const double> v);

FrameChunk linear_attention(const FrameChunk& q, const FrameChunk& k, const FrameChunk& v);

struct MemoryState {
    DenseMatrix m_kv;
    Vector m_k;
    double gamma = 0.9;
    std::uint64_t frames_absorbed = 0;
    /// Largest ||phi(k) v^T||_F over all absorbed frames.
    double max_frame_norm = 0.0;

    std::size_t dim() const noexcept { return m_k.size(); }
    /// c * gamma * (1 - gamma^n) / (1 - gamma), the ceiling on ||M_kv||_F.
    double geometric_bound() const;

    bool operator==(const MemoryState&) const = default;
};

MemoryState memory_init(std::size_t d, double gamma);

/// Absorbs `keys`/`values` (projected, rows oldest to newest) into the memory.
MemoryState memory_update(const MemoryState& state, const FrameChunk& keys, const FrameChunk& values);

FrameChunk memory_guided_attention(const FrameChunk& q, const FrameChunk& k, const FrameChunk& v,
                                   const MemoryState& state);

struct PastChunk {
    FrameChunk k;
    FrameChunk v;
};

/// Explicit pairwise evaluation of memory-guided attention over the whole
/// history. Keeps no streaming state; `past` is ordered oldest chunk first.
FrameChunk full_history_oracle(std::span<const PastChunk> past, const FrameChunk& q, const FrameChunk& k,
                               const FrameChunk& v, double gamma);

inline constexpr std::uint32_t kMemoryStateVersion = 1;

/// JSON record {version, d, gamma, frames_absorbed, max_frame_norm, m_kv, m_k}.
/// Doubles are written with round-trip precision, so parse(dump(s)) == s.
std::string memory_to_json(const MemoryState& state);
MemoryState memory_from_json(std::string_view text);

/// Little-endian binary record; its length depends on d only.
std::vector<std::uint8_t> memory_to_bytes(const MemoryState& state);
MemoryState memory_from_bytes(std::span<const std::uint8_t> bytes);
std::size_t memory_serialized_size(std::size_t d);

}  // namespace memo
