// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Rectified-flow objective and the conditioning machinery around it.
//
//   z_t  = (1 - t) z0 + t eps
//   loss = lambda(t) * ||eps - eps_theta(z_t, t, c)||^2,   lambda(t) = 1 / (1 - t)^2
//   CFG  = (1 + w) eps_theta(. | e) - w eps_theta(.)

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "memo/emotion.hpp"
#include "memo/memory_attention.hpp"
#include "memo/numerics.hpp"

namespace memo {

inline constexpr double kDefaultCfgScale = 3.5;
inline constexpr double kDefaultConditionDropout = 0.05;
/// Default robust-training threshold on the batch loss.
inline constexpr double kDefaultRobustThreshold = 0.1;

struct DiffusionSample {
    Vector z0;
    Vector eps;
    double t = 0.0;
    Vector z_t;

    static DiffusionSample make(Vector z0, Vector eps, double t);
};

/// (1 - t) z0 + t eps; requires 0 <= t < 1.
Vector interpolate(std::span<const double> z0, std::span<const double> eps, double t);

/// 1 / (1 - t)^2; requires 0 <= t < 1.
double loss_weight(double t);

enum class LossReduction { sum, mean };

std::string_view to_string(LossReduction r) noexcept;
LossReduction parse_loss_reduction(std::string_view name);

/// lambda(t) * ||eps - pred||^2, summed (or averaged) over components.
double flow_loss(std::span<const double> pred, std::span<const double> eps, double t,
                 LossReduction reduction = LossReduction::sum);

/// (1 + w) cond - w uncond. Components where the two branches agree are
/// returned unchanged, so blend(x, x, w) == x bit for bit.
Vector cfg_blend(std::span<const double> eps_cond, std::span<const double> eps_uncond, double w);

enum class ConditionKind : std::uint8_t { emotion = 0, reference = 1, audio = 2, past_frames = 3 };
inline constexpr std::size_t kConditionKinds = 4;

constexpr std::uint8_t condition_bit(ConditionKind k) noexcept { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k)); }

/// Inputs the denoiser is conditioned on. A dropped (or absent) condition is
/// replaced by that condition's learned null embedding inside the model.
struct ConditionSet {
    DenseMatrix audio;        // one row of audio features per frame
    EmotionLabel emotion = EmotionLabel::neutral;
    Vector reference;         // reference-image latent
    FrameChunk past_frames;   // preceding clip, when available
    std::uint8_t dropped = 0; // bitmask over ConditionKind

    bool is_dropped(ConditionKind k) const noexcept { return (dropped & condition_bit(k)) != 0; }
    void drop(ConditionKind k) noexcept { dropped |= condition_bit(k); }
    void restore(ConditionKind k) noexcept { dropped &= static_cast<std::uint8_t>(~condition_bit(k)); }
};

/// Drops each of {emotion, reference, audio, past_frames} independently
/// with probability p, drawing one uniform per condition in that order.
ConditionSet condition_dropout(const ConditionSet& conds, SeededRng& rng, double p);

enum class RobustDecision { keep, skip };

struct RobustVerdict {
    RobustDecision decision = RobustDecision::keep;
    /// Set for non-finite losses; such batches are skipped but counted apart.
    bool anomaly = false;

    bool operator==(const RobustVerdict&) const = default;
};

/// Skip iff batch_loss > threshold (strict). NaN or infinite loss is skipped and flagged.
RobustVerdict robust_filter(double batch_loss, double threshold = kDefaultRobustThreshold);

}  // namespace memo
