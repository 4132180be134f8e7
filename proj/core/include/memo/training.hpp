// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "memo/rectified_flow.hpp"
#include "memo/toy_denoiser.hpp"

namespace memo {

/// Synthetic clips whose clean latent is a fixed function of the conditions:
///
///   z0_i = signal_scale * (G audio_i + R reference + offset[emotion])
///
/// with G, R and the per-emotion offsets drawn once from `task_seed`.
struct ToyTaskConfig {
    std::size_t clip_len = 4;
    double signal_scale = 5.0;
    std::uint64_t task_seed = 1234;
};

struct TrainingExample {
    ConditionSet conditions;
    FrameChunk z0;
    FrameChunk eps;
    double t = 0.0;
    FrameChunk z_t;
};

class SyntheticFlowTask {
public:
    SyntheticFlowTask(const DenoiserConfig& model, const ToyTaskConfig& task);

    /// Draws conditions, z0, eps ~ N(0, I) and t ~ U[0, t_max].
    TrainingExample sample(SeededRng& rng, double t_max) const;
    /// Clean latent for the given (undropped) conditions.
    FrameChunk clean_latent(const ConditionSet& conds) const;

private:
    DenoiserConfig model_;
    ToyTaskConfig task_;
    DenseMatrix audio_map_;
    DenseMatrix reference_map_;
    DenseMatrix emotion_offsets_;
};

/// One entry of the staged schedule. Frozen groups receive no updates.
struct TrainingStage {
    std::string name = "joint";
    std::size_t steps = 0;
    std::set<ParamGroup> frozen;
};

struct TrainConfig {
    DenoiserConfig model;
    ToyTaskConfig task;
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double dropout_p = kDefaultConditionDropout;
    /// Threshold on the batch loss of the synthetic task. Untrained batch
    /// losses sit in the hundreds and injected outliers near 1e8.
    double robust_threshold = 5000.0;
    LossReduction reduction = LossReduction::sum;
    double t_max = 0.999;
    double ema_beta = 0.98;
    std::uint64_t seed = 7;
    /// Steps whose batch is replaced by a corrupted one (z0 scaled by outlier_scale).
    std::vector<std::size_t> outlier_steps;
    double outlier_scale = 1e3;
    /// Empty means a single unfrozen stage covering all steps.
    std::vector<TrainingStage> stages;
    double divergence_factor = 10.0;
    std::size_t divergence_patience = 100;

    void validate() const;
};

/// Raised when the EMA loss stays above divergence_factor x initial for
/// divergence_patience consecutive steps, or when the robust filter skips
/// that many consecutive batches.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainState {
    std::size_t step = 0;
    double ema_loss = 0.0;
    std::size_t skipped_batches = 0;
    std::size_t anomalies = 0;
    SeededRng rng;
};

struct StepRecord {
    std::size_t step = 0;
    double t = 0.0;               // batch mean
    double raw_loss = 0.0;        // ||eps - pred||^2, batch mean
    double weighted_loss = 0.0;   // lambda-weighted objective, batch mean
    bool kept = true;
    std::uint8_t dropped_conditions = 0;  // OR over the batch
    double ema_loss = 0.0;
    std::string stage;
};

struct TrainResult {
    TrainState state;
    std::vector<StepRecord> curve;
    std::vector<std::size_t> skipped_steps;
    double initial_ema = 0.0;
    double final_ema = 0.0;
    ToyDenoiser model;
};

TrainResult train_toy(const TrainConfig& config);

/// step,t,raw_loss,weighted_loss,kept_flag,dropped_conditions
void write_loss_curve_csv(std::ostream& out, const std::vector<StepRecord>& curve);

/// Mean batch loss and its gradient (averaged over the batch).
double batch_loss_and_gradient(const ToyDenoiser& model, const std::vector<TrainingExample>& batch,
                               LossReduction reduction, DenoiserParams* grad);

}  // namespace memo
