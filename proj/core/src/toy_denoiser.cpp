// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/toy_denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace memo {

void DenoiserConfig::validate() const {
    if (latent_dim < 2) throw std::invalid_argument("denoiser: latent_dim must be >= 2 (layer norm)");
    if (audio_dim == 0 || emotion_dim == 0 || modulation_hidden == 0) {
        throw std::invalid_argument("denoiser: audio_dim, emotion_dim and modulation_hidden must be >= 1");
    }
}

std::string_view to_string(ParamGroup g) noexcept {
    switch (g) {
        case ParamGroup::input: return "input";
        case ParamGroup::emotion: return "emotion";
        case ParamGroup::modulation: return "modulation";
        case ParamGroup::attention: return "attention";
        case ParamGroup::output: return "output";
        case ParamGroup::null_conditions: return "null_conditions";
    }
    return "?";
}

ParamGroup parse_param_group(std::string_view name) {
    for (auto g : {ParamGroup::input, ParamGroup::emotion, ParamGroup::modulation, ParamGroup::attention,
                   ParamGroup::output, ParamGroup::null_conditions}) {
        if (to_string(g) == name) return g;
    }
    throw std::invalid_argument("unknown parameter group '" + std::string(name) + "'");
}

void DenoiserParams::for_each(const std::function<void(ParamGroup, std::vector<double>&)>& fn) {
    fn(ParamGroup::input, w_in.data());
    fn(ParamGroup::input, b_in);
    fn(ParamGroup::emotion, emotion.table.data());
    fn(ParamGroup::emotion, emotion.null_embedding);
    fn(ParamGroup::modulation, modulation.w_hidden.data());
    fn(ParamGroup::modulation, modulation.b_hidden);
    fn(ParamGroup::modulation, modulation.w_out.data());
    fn(ParamGroup::modulation, modulation.b_out);
    fn(ParamGroup::attention, attention.w_q.data());
    fn(ParamGroup::attention, attention.w_k.data());
    fn(ParamGroup::attention, attention.w_v.data());
    fn(ParamGroup::output, w_out.data());
    fn(ParamGroup::output, b_out);
    fn(ParamGroup::null_conditions, null_audio);
    fn(ParamGroup::null_conditions, null_reference);
}

void DenoiserParams::for_each(const std::function<void(ParamGroup, const std::vector<double>&)>& fn) const {
    const_cast<DenoiserParams*>(this)->for_each(
        [&](ParamGroup g, std::vector<double>& v) { fn(g, static_cast<const std::vector<double>&>(v)); });
}

DenoiserParams DenoiserParams::zeros_like() const {
    DenoiserParams z = *this;
    z.for_each([](ParamGroup, std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); });
    return z;
}

std::size_t DenoiserParams::size() const {
    std::size_t n = 0;
    for_each([&](ParamGroup, const std::vector<double>& v) { n += v.size(); });
    return n;
}

Vector DenoiserParams::flatten() const {
    Vector flat;
    flat.reserve(size());
    for_each([&](ParamGroup, const std::vector<double>& v) { flat.insert(flat.end(), v.begin(), v.end()); });
    return flat;
}

void DenoiserParams::assign(std::span<const double> flat) {
    if (flat.size() != size()) throw std::invalid_argument("DenoiserParams::assign: wrong parameter count");
    std::size_t pos = 0;
    for_each([&](ParamGroup, std::vector<double>& v) {
        std::copy(flat.begin() + pos, flat.begin() + pos + v.size(), v.begin());
        pos += v.size();
    });
}

struct ToyDenoiser::Forward {
    std::vector<Vector> inputs;
    DenseMatrix h;
    Vector embedding;
    Vector hidden;
    Vector scale;
    Vector shift;
    DenseMatrix normed;
    Vector inv_sigma;
    FrameChunk x;
    ProjectedChunk qkv;
    FrameChunk y;
    FrameChunk u;
};

ToyDenoiser::ToyDenoiser(DenoiserConfig config, DenoiserParams params) : config_(config), params_(std::move(params)) {
    config_.validate();
    const std::size_t d = config_.latent_dim;
    const auto bad = [](const char* what) { throw std::invalid_argument(std::string("ToyDenoiser: bad shape for ") + what); };
    if (params_.w_in.rows() != d || params_.w_in.cols() != config_.input_dim() || params_.b_in.size() != d) bad("input");
    if (params_.emotion.table.rows() != kEmotionCount || params_.emotion.dim() != config_.emotion_dim ||
        params_.emotion.null_embedding.size() != config_.emotion_dim) {
        bad("emotion");
    }
    const auto& m = params_.modulation;
    if (m.embed_dim() != config_.emotion_dim || m.hidden_dim() != config_.modulation_hidden ||
        m.b_hidden.size() != config_.modulation_hidden || m.w_out.rows() != 2 * d ||
        m.w_out.cols() != config_.modulation_hidden || m.b_out.size() != 2 * d) {
        bad("modulation");
    }
    if (params_.attention.dim() != d) bad("attention");
    params_.attention.validate();
    if (params_.w_out.rows() != d || params_.w_out.cols() != d || params_.b_out.size() != d) bad("output");
    if (params_.null_audio.size() != config_.audio_dim || params_.null_reference.size() != d) bad("null_conditions");
    require_finite(params_.flatten(), "ToyDenoiser parameters");
}

ToyDenoiser ToyDenoiser::initialize(const DenoiserConfig& config, SeededRng& rng, bool zero_init_modulation) {
    config.validate();
    const std::size_t d = config.latent_dim;
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(config.input_dim()));
    const double d_scale = 1.0 / std::sqrt(static_cast<double>(d));
    DenoiserParams p;
    p.w_in = rng.normal_matrix(d, config.input_dim(), in_scale);
    p.b_in = Vector(d, 0.0);
    p.emotion = EmotionEmbeddingTable::random(config.emotion_dim, rng, 1.0);
    p.modulation = zero_init_modulation
                       ? AdaLnModulation::zero_init(config.emotion_dim, config.modulation_hidden, d, rng)
                       : AdaLnModulation::random(config.emotion_dim, config.modulation_hidden, d, rng, 0.5);
    p.attention = AttentionProjections::random(d, rng, d_scale);
    p.w_out = rng.normal_matrix(d, d, d_scale);
    p.b_out = Vector(d, 0.0);
    p.null_audio = rng.normal_vector(config.audio_dim, 0.1);
    p.null_reference = rng.normal_vector(d, 0.1);
    return ToyDenoiser(config, std::move(p));
}

void ToyDenoiser::check_inputs(const FrameChunk& z_t, double t, const ConditionSet& conds,
                               const MemoryState* memory) const {
    const std::size_t d = config_.latent_dim;
    if (z_t.rows() == 0 || z_t.cols() != d) throw std::invalid_argument("ToyDenoiser: z_t must be f x latent_dim");
    if (!(t >= 0.0 && t < 1.0)) throw std::domain_error("ToyDenoiser: t must lie in [0, 1)");
    if (!conds.is_dropped(ConditionKind::audio) &&
        (conds.audio.rows() != z_t.rows() || conds.audio.cols() != config_.audio_dim)) {
        throw std::invalid_argument("ToyDenoiser: audio must have one row of audio_dim features per frame");
    }
    if (!conds.is_dropped(ConditionKind::reference) && conds.reference.size() != d) {
        throw std::invalid_argument("ToyDenoiser: reference must have latent_dim entries");
    }
    if (memory != nullptr && memory->dim() != d) throw std::invalid_argument("ToyDenoiser: memory dim != latent_dim");
}

ToyDenoiser::Forward ToyDenoiser::forward(const FrameChunk& z_t, double t, const ConditionSet& conds,
                                          const MemoryState* memory) const {
    check_inputs(z_t, t, conds, memory);
    const std::size_t f = z_t.rows();
    const std::size_t d = config_.latent_dim;
    const auto& p = params_;
    Forward fw;

    const bool audio_dropped = conds.is_dropped(ConditionKind::audio);
    const bool ref_dropped = conds.is_dropped(ConditionKind::reference);
    fw.h = DenseMatrix(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        Vector in;
        in.reserve(config_.input_dim());
        in.insert(in.end(), z_t.row(i).begin(), z_t.row(i).end());
        if (audio_dropped) {
            in.insert(in.end(), p.null_audio.begin(), p.null_audio.end());
        } else {
            in.insert(in.end(), conds.audio.row(i).begin(), conds.audio.row(i).end());
        }
        const Vector& ref = ref_dropped ? p.null_reference : conds.reference;
        in.insert(in.end(), ref.begin(), ref.end());
        const std::size_t m = in.size();
        in.push_back(t);
        for (std::size_t c = 0; c < m; ++c) in.push_back(t * in[c]);
        const Vector hi = matvec(p.w_in, in);
        for (std::size_t c = 0; c < d; ++c) fw.h(i, c) = hi[c] + p.b_in[c];
        fw.inputs.push_back(std::move(in));
    }

    fw.embedding = conds.is_dropped(ConditionKind::emotion) ? p.emotion.null_embedding : p.emotion.lookup(conds.emotion);
    fw.hidden = matvec(p.modulation.w_hidden, fw.embedding);
    for (std::size_t k = 0; k < fw.hidden.size(); ++k) fw.hidden[k] = std::tanh(fw.hidden[k] + p.modulation.b_hidden[k]);
    const Vector raw = matvec(p.modulation.w_out, fw.hidden);
    fw.scale.resize(d);
    fw.shift.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        fw.scale[c] = 1.0 + (raw[c] + p.modulation.b_out[c]);
        fw.shift[c] = raw[d + c] + p.modulation.b_out[d + c];
    }

    fw.normed = DenseMatrix(f, d);
    fw.inv_sigma.resize(f);
    fw.x = FrameChunk(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        const Vector n = layer_norm(fw.h.row(i), kLayerNormEps);
        double mean = 0.0;
        for (double v : fw.h.row(i)) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : fw.h.row(i)) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        fw.inv_sigma[i] = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t c = 0; c < d; ++c) {
            fw.normed(i, c) = n[c];
            fw.x(i, c) = fw.scale[c] * n[c] + fw.shift[c];
        }
    }

    fw.qkv = project(fw.x, p.attention);
    const MemoryState empty = memory_init(d, memory != nullptr ? memory->gamma : 0.5);
    const FrameChunk att = memory_guided_attention(fw.qkv.q, fw.qkv.k, fw.qkv.v, memory != nullptr ? *memory : empty);

    fw.y = FrameChunk(f, d);
    fw.u = FrameChunk(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t c = 0; c < d; ++c) fw.y(i, c) = fw.h(i, c) + att(i, c);
        const Vector ui = matvec(p.w_out, fw.y.row(i));
        for (std::size_t c = 0; c < d; ++c) fw.u(i, c) = ui[c] + p.b_out[c];
    }
    return fw;
}

FrameChunk ToyDenoiser::velocity(const FrameChunk& z_t, double t, const ConditionSet& conds,
                                 const MemoryState* memory) const {
    return forward(z_t, t, conds, memory).u;
}

FrameChunk ToyDenoiser::predict(const FrameChunk& z_t, double t, const ConditionSet& conds,
                                const MemoryState* memory) const {
    const FrameChunk u = velocity(z_t, t, conds, memory);
    FrameChunk pred(z_t.rows(), z_t.cols());
    for (std::size_t k = 0; k < pred.data().size(); ++k) pred.data()[k] = z_t.data()[k] + (1.0 - t) * u.data()[k];
    return pred;
}

double ToyDenoiser::loss_and_gradient(const FrameChunk& z_t, const FrameChunk& eps, double t, const ConditionSet& conds,
                                      const MemoryState* memory, LossReduction reduction, DenoiserParams* grad) const {
    if (eps.rows() != z_t.rows() || eps.cols() != z_t.cols()) throw std::invalid_argument("loss_and_gradient: eps shape");
    const Forward fw = forward(z_t, t, conds, memory);
    const std::size_t f = z_t.rows();
    const std::size_t d = config_.latent_dim;
    const auto& p = params_;

    FrameChunk pred(f, d);
    for (std::size_t k = 0; k < pred.data().size(); ++k) pred.data()[k] = z_t.data()[k] + (1.0 - t) * fw.u.data()[k];
    const double loss = flow_loss(pred.data(), eps.data(), t, reduction);
    if (grad == nullptr) return loss;

    const double lambda = loss_weight(t);
    const double norm = reduction == LossReduction::mean ? 1.0 / static_cast<double>(f * d) : 1.0;

    // Output head.
    FrameChunk g_y(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        Vector g_u(d);
        for (std::size_t c = 0; c < d; ++c) {
            const double g_pred = -2.0 * lambda * norm * (eps(i, c) - pred(i, c));
            g_u[c] = (1.0 - t) * g_pred;
        }
        add_outer(grad->w_out, g_u, fw.y.row(i));
        for (std::size_t c = 0; c < d; ++c) grad->b_out[c] += g_u[c];
        const Vector gy = matvec_transposed(p.w_out, g_u);
        for (std::size_t c = 0; c < d; ++c) g_y(i, c) = gy[c];
    }

    // Memory-guided linear attention: out_i = (A^T p_i) / (p_i . B), memory constant.
    const auto& q = fw.qkv.q;
    const auto& k = fw.qkv.k;
    const auto& v = fw.qkv.v;
    DenseMatrix A = memory != nullptr ? memory->m_kv : DenseMatrix(d, d);
    Vector B = memory != nullptr ? memory->m_k : Vector(d, 0.0);
    std::vector<Vector> pk(f), pq(f);
    for (std::size_t j = 0; j < f; ++j) {
        pk[j] = feature_map(k.row(j));
        add_outer(A, pk[j], v.row(j));
        for (std::size_t r = 0; r < d; ++r) B[r] += pk[j][r];
    }
    DenseMatrix g_A(d, d);
    Vector g_B(d, 0.0);
    FrameChunk g_q(f, d), g_k(f, d), g_v(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        pq[i] = feature_map(q.row(i));
        const double den = dot(pq[i], B) + kDenominatorGuard;
        const Vector num = matvec_transposed(A, pq[i]);
        Vector g_num(d);
        double g_den = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            g_num[c] = g_y(i, c) / den;
            g_den -= g_y(i, c) * (num[c] / den) / den;
        }
        Vector g_p = matvec(A, g_num);
        for (std::size_t r = 0; r < d; ++r) g_p[r] += g_den * B[r];
        add_outer(g_A, pq[i], g_num);
        for (std::size_t r = 0; r < d; ++r) g_B[r] += g_den * pq[i][r];
        const double s = dot(pq[i], g_p);
        for (std::size_t r = 0; r < d; ++r) g_q(i, r) = pq[i][r] * (g_p[r] - s);
    }
    for (std::size_t j = 0; j < f; ++j) {
        Vector g_kappa = matvec(g_A, v.row(j));
        for (std::size_t r = 0; r < d; ++r) g_kappa[r] += g_B[r];
        const Vector gv = matvec_transposed(g_A, pk[j]);
        const double s = dot(pk[j], g_kappa);
        for (std::size_t r = 0; r < d; ++r) {
            g_k(j, r) = pk[j][r] * (g_kappa[r] - s);
            g_v(j, r) = gv[r];
        }
    }

    // Projections back to x.
    FrameChunk g_x(f, d);
    for (std::size_t i = 0; i < f; ++i) {
        add_outer(grad->attention.w_q, g_q.row(i), fw.x.row(i));
        add_outer(grad->attention.w_k, g_k.row(i), fw.x.row(i));
        add_outer(grad->attention.w_v, g_v.row(i), fw.x.row(i));
        const Vector a = matvec_transposed(p.attention.w_q, g_q.row(i));
        const Vector b = matvec_transposed(p.attention.w_k, g_k.row(i));
        const Vector c3 = matvec_transposed(p.attention.w_v, g_v.row(i));
        for (std::size_t c = 0; c < d; ++c) g_x(i, c) = a[c] + b[c] + c3[c];
    }

    // AdaLN: x = scale * n + shift; n = layer_norm(h).
    Vector g_raw(2 * d, 0.0);
    FrameChunk g_h = g_y;  // residual path
    for (std::size_t i = 0; i < f; ++i) {
        Vector g_n(d);
        for (std::size_t c = 0; c < d; ++c) {
            g_n[c] = fw.scale[c] * g_x(i, c);
            g_raw[c] += g_x(i, c) * fw.normed(i, c);
            g_raw[d + c] += g_x(i, c);
        }
        double mean_g = 0.0, mean_gn = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            mean_g += g_n[c];
            mean_gn += g_n[c] * fw.normed(i, c);
        }
        mean_g /= static_cast<double>(d);
        mean_gn /= static_cast<double>(d);
        for (std::size_t c = 0; c < d; ++c) {
            g_h(i, c) += fw.inv_sigma[i] * (g_n[c] - mean_g - fw.normed(i, c) * mean_gn);
        }
    }

    // Modulation network.
    for (std::size_t r = 0; r < 2 * d; ++r) grad->modulation.b_out[r] += g_raw[r];
    add_outer(grad->modulation.w_out, g_raw, fw.hidden);
    Vector g_pre = matvec_transposed(p.modulation.w_out, g_raw);
    for (std::size_t kk = 0; kk < g_pre.size(); ++kk) g_pre[kk] *= 1.0 - fw.hidden[kk] * fw.hidden[kk];
    add_outer(grad->modulation.w_hidden, g_pre, fw.embedding);
    for (std::size_t kk = 0; kk < g_pre.size(); ++kk) grad->modulation.b_hidden[kk] += g_pre[kk];
    const Vector g_emb = matvec_transposed(p.modulation.w_hidden, g_pre);
    if (conds.is_dropped(ConditionKind::emotion)) {
        for (std::size_t c = 0; c < g_emb.size(); ++c) grad->emotion.null_embedding[c] += g_emb[c];
    } else {
        auto row = grad->emotion.table.row(index_of(conds.emotion));
        for (std::size_t c = 0; c < g_emb.size(); ++c) row[c] += g_emb[c];
    }

    // Input layer and null embeddings.
    const std::size_t da = config_.audio_dim;
    const std::size_t m = config_.condition_dim();
    for (std::size_t i = 0; i < f; ++i) {
        add_outer(grad->w_in, g_h.row(i), fw.inputs[i]);
        for (std::size_t c = 0; c < d; ++c) grad->b_in[c] += g_h(i, c);
        const Vector g_in = matvec_transposed(p.w_in, g_h.row(i));
        // Each condition feature enters twice: as itself and scaled by t.
        auto g_feature = [&](std::size_t c) { return g_in[c] + t * g_in[m + 1 + c]; };
        if (conds.is_dropped(ConditionKind::audio)) {
            for (std::size_t c = 0; c < da; ++c) grad->null_audio[c] += g_feature(d + c);
        }
        if (conds.is_dropped(ConditionKind::reference)) {
            for (std::size_t c = 0; c < d; ++c) grad->null_reference[c] += g_feature(d + da + c);
        }
    }
    return loss;
}

ProjectedChunk ToyDenoiser::project_frames(const FrameChunk& frames) const {
    return project(frames, params_.attention);
}

std::string ToyDenoiser::to_json() const {
    nlohmann::json j;
    j["latent_dim"] = config_.latent_dim;
    j["audio_dim"] = config_.audio_dim;
    j["emotion_dim"] = config_.emotion_dim;
    j["modulation_hidden"] = config_.modulation_hidden;
    j["parameters"] = params_.flatten();
    return j.dump();
}

ToyDenoiser ToyDenoiser::from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    DenoiserConfig cfg;
    cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
    cfg.audio_dim = j.at("audio_dim").get<std::size_t>();
    cfg.emotion_dim = j.at("emotion_dim").get<std::size_t>();
    cfg.modulation_hidden = j.at("modulation_hidden").get<std::size_t>();
    SeededRng rng(0);
    ToyDenoiser shell = initialize(cfg, rng, true);
    shell.params_.assign(j.at("parameters").get<Vector>());
    return ToyDenoiser(cfg, std::move(shell.params_));
}

}  // namespace memo
