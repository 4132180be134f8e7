// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/training.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace memo {

SyntheticFlowTask::SyntheticFlowTask(const DenoiserConfig& model, const ToyTaskConfig& task)
    : model_(model), task_(task) {
    model_.validate();
    if (task_.clip_len == 0) throw std::invalid_argument("toy task: clip_len must be >= 1");
    SeededRng rng(task_.task_seed);
    const std::size_t d = model_.latent_dim;
    audio_map_ = rng.normal_matrix(d, model_.audio_dim, 1.0 / std::sqrt(static_cast<double>(model_.audio_dim)));
    reference_map_ = rng.normal_matrix(d, d, 0.5 / std::sqrt(static_cast<double>(d)));
    emotion_offsets_ = rng.normal_matrix(kEmotionCount, d, 0.5);
}

FrameChunk SyntheticFlowTask::clean_latent(const ConditionSet& conds) const {
    const std::size_t d = model_.latent_dim;
    const std::size_t f = conds.audio.rows();
    const Vector ref = matvec(reference_map_, conds.reference);
    const auto offset = emotion_offsets_.row(index_of(conds.emotion));
    FrameChunk z0(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        const Vector a = matvec(audio_map_, conds.audio.row(i));
        for (std::size_t c = 0; c < d; ++c) z0(i, c) = task_.signal_scale * (a[c] + ref[c] + offset[c]);
    }
    return z0;
}

TrainingExample SyntheticFlowTask::sample(SeededRng& rng, double t_max) const {
    const std::size_t d = model_.latent_dim;
    const std::size_t f = task_.clip_len;
    TrainingExample ex;
    ex.conditions.audio = rng.normal_matrix(f, model_.audio_dim);
    ex.conditions.emotion = emotion_from_index(rng.index(kEmotionCount));
    ex.conditions.reference = rng.normal_vector(d);
    ex.conditions.drop(ConditionKind::past_frames);  // single-clip training
    ex.z0 = clean_latent(ex.conditions);
    ex.eps = rng.normal_matrix(f, d);
    ex.t = rng.uniform(0.0, t_max);
    ex.z_t = FrameChunk(f, d, interpolate(ex.z0.data(), ex.eps.data(), ex.t));
    return ex;
}

void TrainConfig::validate() const {
    model.validate();
    if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("train: learning_rate must be >= 0");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("train: dropout_p must lie in [0, 1)");
    if (!(robust_threshold > 0.0)) throw std::invalid_argument("train: robust_threshold must be > 0");
    if (!(t_max > 0.0 && t_max < 1.0)) throw std::invalid_argument("train: t_max must lie in (0, 1)");
    if (!(ema_beta >= 0.0 && ema_beta < 1.0)) throw std::invalid_argument("train: ema_beta must lie in [0, 1)");
    if (stages.empty() && steps == 0) throw std::invalid_argument("train: steps must be >= 1");
    for (const auto& s : stages)
        if (s.steps == 0) throw std::invalid_argument("train: stage '" + s.name + "' has zero steps");
}

double batch_loss_and_gradient(const ToyDenoiser& model, const std::vector<TrainingExample>& batch,
                               LossReduction reduction, DenoiserParams* grad) {
    double total = 0.0;
    for (const auto& ex : batch) total += model.loss_and_gradient(ex.z_t, ex.eps, ex.t, ex.conditions, nullptr, reduction, grad);
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (grad != nullptr) {
        grad->for_each([&](ParamGroup, std::vector<double>& v) {
            for (auto& x : v) x *= inv;
        });
    }
    return total * inv;
}

TrainResult train_toy(const TrainConfig& config) {
    config.validate();
    std::vector<TrainingStage> stages = config.stages;
    if (stages.empty()) stages.push_back({"joint", config.steps, {}});

    SeededRng root(config.seed);
    SeededRng init_rng = root.derive(1);
    TrainResult result{TrainState{0, 0.0, 0, 0, root.derive(2)}, {}, {}, 0.0, 0.0,
                       ToyDenoiser::initialize(config.model, init_rng, true)};
    ToyDenoiser& model = result.model;
    TrainState& state = result.state;
    const SyntheticFlowTask task(config.model, config.task);
    const std::set<std::size_t> outliers(config.outlier_steps.begin(), config.outlier_steps.end());

    bool have_ema = false;
    std::size_t over_limit = 0;
    std::size_t skipped_run = 0;
    for (const auto& stage : stages) {
        for (std::size_t s = 0; s < stage.steps; ++s, ++state.step) {
            std::vector<TrainingExample> batch;
            StepRecord rec;
            rec.step = state.step;
            rec.stage = stage.name;
            for (std::size_t b = 0; b < config.batch_size; ++b) {
                TrainingExample ex = task.sample(state.rng, config.t_max);
                ex.conditions = condition_dropout(ex.conditions, state.rng, config.dropout_p);
                if (outliers.count(state.step) != 0) {
                    for (auto& x : ex.z0.data()) x *= config.outlier_scale;
                    ex.z_t = FrameChunk(ex.z0.rows(), ex.z0.cols(), interpolate(ex.z0.data(), ex.eps.data(), ex.t));
                }
                rec.t += ex.t;
                rec.dropped_conditions |= ex.conditions.dropped;
                batch.push_back(std::move(ex));
            }
            rec.t /= static_cast<double>(batch.size());

            DenoiserParams grad = model.params().zeros_like();
            rec.weighted_loss = batch_loss_and_gradient(model, batch, config.reduction, &grad);
            for (const auto& ex : batch) {
                const FrameChunk pred = model.predict(ex.z_t, ex.t, ex.conditions, nullptr);
                rec.raw_loss += flow_loss(pred.data(), ex.eps.data(), 0.0, config.reduction);
            }
            rec.raw_loss /= static_cast<double>(batch.size());

            const RobustVerdict verdict = robust_filter(rec.weighted_loss, config.robust_threshold);
            if (verdict.decision == RobustDecision::skip) {
                rec.kept = false;
                ++state.skipped_batches;
                if (verdict.anomaly) ++state.anomalies;
                result.skipped_steps.push_back(state.step);
                rec.ema_loss = state.ema_loss;
                result.curve.push_back(rec);
                if (++skipped_run >= config.divergence_patience) {
                    std::ostringstream msg;
                    msg << "train_toy diverged at step " << state.step << " (stage '" << stage.name << "'): "
                        << skipped_run << " consecutive batches skipped by the robust filter"
                        << "; try a smaller learning_rate (currently " << config.learning_rate << ")";
                    throw TrainingDiverged(msg.str());
                }
                continue;
            }
            skipped_run = 0;

            std::vector<std::vector<double>*> grads;
            grad.for_each([&](ParamGroup, std::vector<double>& g) { grads.push_back(&g); });
            std::size_t idx = 0;
            model.params().for_each([&](ParamGroup group, std::vector<double>& p) {
                const auto& g = *grads[idx++];
                if (stage.frozen.count(group) != 0) return;
                for (std::size_t k = 0; k < p.size(); ++k) p[k] -= config.learning_rate * g[k];
            });

            if (!have_ema) {
                state.ema_loss = rec.weighted_loss;
                result.initial_ema = rec.weighted_loss;
                have_ema = true;
            } else {
                state.ema_loss = config.ema_beta * state.ema_loss + (1.0 - config.ema_beta) * rec.weighted_loss;
            }
            rec.ema_loss = state.ema_loss;
            result.curve.push_back(rec);

            if (!std::isfinite(state.ema_loss) || state.ema_loss > config.divergence_factor * result.initial_ema) {
                if (++over_limit >= config.divergence_patience || !std::isfinite(state.ema_loss)) {
                    std::ostringstream msg;
                    msg << "train_toy diverged at step " << state.step << " (stage '" << stage.name
                        << "'): EMA loss " << state.ema_loss << " vs initial " << result.initial_ema
                        << "; try a smaller learning_rate (currently " << config.learning_rate << ")";
                    throw TrainingDiverged(msg.str());
                }
            } else {
                over_limit = 0;
            }
        }
    }
    result.final_ema = state.ema_loss;
    return result;
}

void write_loss_curve_csv(std::ostream& out, const std::vector<StepRecord>& curve) {
    out << "step,t,raw_loss,weighted_loss,kept_flag,dropped_conditions\n";
    out << std::setprecision(17);
    for (const auto& r : curve) {
        out << r.step << ',' << r.t << ',' << r.raw_loss << ',' << r.weighted_loss << ',' << (r.kept ? 1 : 0) << ','
            << static_cast<unsigned>(r.dropped_conditions) << '\n';
    }
}

}  // namespace memo
