// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/rectified_flow.hpp"

#include <cmath>
#include <stdexcept>

namespace memo {

namespace {

void require_t(double t, const char* what) {
    if (!(t >= 0.0 && t < 1.0)) {
        throw std::domain_error(std::string(what) + ": t must lie in [0, 1), got " + std::to_string(t));
    }
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

DiffusionSample DiffusionSample::make(Vector z0, Vector eps, double t) {
    DiffusionSample s;
    s.z_t = interpolate(z0, eps, t);
    s.z0 = std::move(z0);
    s.eps = std::move(eps);
    s.t = t;
    return s;
}

Vector interpolate(std::span<const double> z0, std::span<const double> eps, double t) {
    require_t(t, "interpolate");
    require_same_size(z0, eps, "interpolate");
    Vector out(z0.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * z0[i] + t * eps[i];
    return out;
}

double loss_weight(double t) {
    require_t(t, "loss_weight");
    const double s = 1.0 - t;
    return 1.0 / (s * s);
}

std::string_view to_string(LossReduction r) noexcept { return r == LossReduction::sum ? "sum" : "mean"; }

LossReduction parse_loss_reduction(std::string_view name) {
    if (name == "sum") return LossReduction::sum;
    if (name == "mean") return LossReduction::mean;
    throw std::invalid_argument("unknown loss reduction '" + std::string(name) + "' (expected sum or mean)");
}

double flow_loss(std::span<const double> pred, std::span<const double> eps, double t, LossReduction reduction) {
    require_same_size(pred, eps, "flow_loss");
    const double w = loss_weight(t);
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = eps[i] - pred[i];
        sq += e * e;
    }
    if (reduction == LossReduction::mean && !pred.empty()) sq /= static_cast<double>(pred.size());
    return w * sq;
}

Vector cfg_blend(std::span<const double> eps_cond, std::span<const double> eps_uncond, double w) {
    require_same_size(eps_cond, eps_uncond, "cfg_blend");
    Vector out(eps_cond.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double c = eps_cond[i];
        const double u = eps_uncond[i];
        out[i] = (c == u) ? c : (1.0 + w) * c - w * u;
    }
    return out;
}

ConditionSet condition_dropout(const ConditionSet& conds, SeededRng& rng, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("condition_dropout: p must lie in [0, 1)");
    ConditionSet out = conds;
    for (std::size_t k = 0; k < kConditionKinds; ++k) {
        if (rng.uniform() < p) out.drop(static_cast<ConditionKind>(k));
    }
    return out;
}

RobustVerdict robust_filter(double batch_loss, double threshold) {
    if (!std::isfinite(batch_loss)) return {RobustDecision::skip, true};
    if (batch_loss < 0.0) throw std::invalid_argument("robust_filter: negative loss");
    return {batch_loss > threshold ? RobustDecision::skip : RobustDecision::keep, false};
}

}  // namespace memo
