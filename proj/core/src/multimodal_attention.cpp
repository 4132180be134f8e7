// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/multimodal_attention.hpp"

#include <cmath>
#include <stdexcept>

namespace memo {

namespace {

struct Projected {
    std::vector<Vector> q, k, v;
};

Projected project_tokens(const TokenSequence& seq, const AttentionProjections& proj) {
    Projected p;
    for (const auto& t : seq.tokens) {
        p.q.push_back(matvec(proj.w_q, t));
        p.k.push_back(matvec(proj.w_k, t));
        p.v.push_back(matvec(proj.w_v, t));
    }
    return p;
}

// Softmax attention of one query over the selected keys.
Vector attend(const Vector& q, const std::vector<const Vector*>& keys, const std::vector<const Vector*>& values) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.size()));
    Vector scores(keys.size());
    for (std::size_t j = 0; j < keys.size(); ++j) scores[j] = scale * dot(q, *keys[j]);
    const Vector w = softmax(scores);
    Vector out(values.front()->size(), 0.0);
    for (std::size_t j = 0; j < values.size(); ++j)
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[j] * (*values[j])[c];
    return out;
}

void require_modality(const TokenSequence& seq, Modality m, const char* what) {
    for (auto tag : seq.modality)
        if (tag != m) throw std::invalid_argument(std::string(what) + ": unexpected modality tag");
}

}  // namespace

std::size_t TokenSequence::dim() const {
    if (tokens.empty()) throw std::invalid_argument("TokenSequence: empty");
    return tokens.front().size();
}

std::size_t TokenSequence::count(Modality m, bool unmasked_only) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i)
        if (modality[i] == m && (!unmasked_only || mask[i])) ++n;
    return n;
}

void TokenSequence::validate() const {
    if (modality.size() != tokens.size() || mask.size() != tokens.size()) {
        throw std::invalid_argument("TokenSequence: tokens/modality/mask length mismatch");
    }
    if (tokens.empty()) return;
    const std::size_t d = tokens.front().size();
    for (const auto& t : tokens) {
        if (t.size() != d) throw std::invalid_argument("TokenSequence: inconsistent token dim");
        require_finite(t, "TokenSequence");
    }
}

TokenSequence TokenSequence::from_rows(const DenseMatrix& rows, Modality m) {
    TokenSequence s;
    for (std::size_t i = 0; i < rows.rows(); ++i) s.push_back(Vector(rows.row(i).begin(), rows.row(i).end()), m);
    return s;
}

void TokenSequence::push_back(Vector token, Modality m, bool valid) {
    tokens.push_back(std::move(token));
    modality.push_back(m);
    mask.push_back(valid);
}

TokenSequence concat_video_audio(const TokenSequence& video, const TokenSequence& audio) {
    require_modality(video, Modality::video, "concat_video_audio");
    require_modality(audio, Modality::audio, "concat_video_audio");
    TokenSequence joint = video;
    for (std::size_t i = 0; i < audio.size(); ++i) joint.push_back(audio.tokens[i], Modality::audio, audio.mask[i]);
    joint.validate();
    return joint;
}

TokenSequence select_modality(const TokenSequence& seq, Modality m) {
    TokenSequence out;
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq.modality[i] == m) out.push_back(seq.tokens[i], m, seq.mask[i]);
    return out;
}

TokenSequence cross_attention(const TokenSequence& video, const TokenSequence& audio, const AttentionProjections& proj) {
    video.validate();
    audio.validate();
    proj.validate();
    require_modality(video, Modality::video, "cross_attention");
    require_modality(audio, Modality::audio, "cross_attention");
    if (audio.count(Modality::audio, true) == 0) throw std::invalid_argument("cross_attention: no unmasked audio tokens");
    if (video.count(Modality::video, true) == 0) throw std::invalid_argument("cross_attention: no unmasked video tokens");
    if (video.dim() != proj.dim() || audio.dim() != proj.dim()) throw std::invalid_argument("cross_attention: dim mismatch");

    const Projected pv = project_tokens(video, proj);
    const Projected pa = project_tokens(audio, proj);
    std::vector<const Vector*> keys, values;
    for (std::size_t j = 0; j < audio.size(); ++j) {
        if (!audio.mask[j]) continue;
        keys.push_back(&pa.k[j]);
        values.push_back(&pa.v[j]);
    }
    TokenSequence out;
    for (std::size_t i = 0; i < video.size(); ++i) {
        if (!video.mask[i]) {
            out.push_back(Vector(proj.dim(), 0.0), Modality::video, false);
            continue;
        }
        out.push_back(attend(pv.q[i], keys, values), Modality::video, true);
    }
    return out;
}

TokenSequence multimodal_attention(const TokenSequence& joint, const AttentionProjections& proj) {
    joint.validate();
    proj.validate();
    if (joint.count(Modality::video, true) == 0) {
        throw std::invalid_argument("multimodal_attention: at least one unmasked video token required");
    }
    if (joint.dim() != proj.dim()) throw std::invalid_argument("multimodal_attention: dim mismatch");

    const Projected p = project_tokens(joint, proj);
    std::vector<const Vector*> keys, values;
    for (std::size_t j = 0; j < joint.size(); ++j) {
        if (!joint.mask[j]) continue;
        keys.push_back(&p.k[j]);
        values.push_back(&p.v[j]);
    }
    TokenSequence out;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (!joint.mask[i]) {
            out.push_back(Vector(proj.dim(), 0.0), joint.modality[i], false);
            continue;
        }
        out.push_back(attend(p.q[i], keys, values), joint.modality[i], true);
    }
    return out;
}

Vector EmotionEmbeddingTable::lookup(EmotionLabel label) const {
    const auto r = table.row(index_of(label));
    return Vector(r.begin(), r.end());
}

EmotionEmbeddingTable EmotionEmbeddingTable::random(std::size_t dim, SeededRng& rng, double scale) {
    return {rng.normal_matrix(kEmotionCount, dim, scale), rng.normal_vector(dim, scale)};
}

std::pair<Vector, Vector> AdaLnModulation::modulate(std::span<const double> embedding) const {
    if (embedding.size() != embed_dim()) {
        throw std::invalid_argument("emotion_adaln: embedding dim " + std::to_string(embedding.size()) +
                                    " != modulation input dim " + std::to_string(embed_dim()));
    }
    Vector hidden = matvec(w_hidden, embedding);
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::tanh(hidden[i] + b_hidden[i]);
    const Vector raw = matvec(w_out, hidden);
    const std::size_t d = feature_dim();
    Vector scale(d), shift(d);
    for (std::size_t c = 0; c < d; ++c) {
        scale[c] = 1.0 + (raw[c] + b_out[c]);
        shift[c] = raw[d + c] + b_out[d + c];
    }
    return {std::move(scale), std::move(shift)};
}

AdaLnModulation AdaLnModulation::zero_init(std::size_t embed_dim, std::size_t hidden_dim, std::size_t feature_dim,
                                           SeededRng& rng) {
    AdaLnModulation m;
    m.w_hidden = rng.normal_matrix(hidden_dim, embed_dim, 1.0 / std::sqrt(static_cast<double>(embed_dim)));
    m.b_hidden = Vector(hidden_dim, 0.0);
    m.w_out = DenseMatrix(2 * feature_dim, hidden_dim);
    m.b_out = Vector(2 * feature_dim, 0.0);
    return m;
}

AdaLnModulation AdaLnModulation::random(std::size_t embed_dim, std::size_t hidden_dim, std::size_t feature_dim,
                                        SeededRng& rng, double out_scale) {
    AdaLnModulation m = zero_init(embed_dim, hidden_dim, feature_dim, rng);
    m.b_hidden = rng.normal_vector(hidden_dim, 0.1);
    m.w_out = rng.normal_matrix(2 * feature_dim, hidden_dim, out_scale);
    m.b_out = rng.normal_vector(2 * feature_dim, out_scale);
    return m;
}

TokenSequence emotion_adaln(const TokenSequence& x, std::span<const double> embedding, const AdaLnModulation& mod,
                            double eps) {
    x.validate();
    const auto [scale, shift] = mod.modulate(embedding);
    TokenSequence out = x;
    for (auto& token : out.tokens) {
        if (token.size() != mod.feature_dim()) throw std::invalid_argument("emotion_adaln: token dim != modulation dim");
        const Vector n = layer_norm(token, eps);
        for (std::size_t c = 0; c < token.size(); ++c) token[c] = scale[c] * n[c] + shift[c];
    }
    return out;
}

}  // namespace memo
