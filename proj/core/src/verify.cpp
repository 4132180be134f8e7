// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "memo/data_pipeline.hpp"
#include "memo/emotion.hpp"
#include "memo/memory_attention.hpp"
#include "memo/multimodal_attention.hpp"
#include "memo/rectified_flow.hpp"
#include "memo/toy_denoiser.hpp"

namespace memo {

namespace {

struct Outcome {
    double max_error = 0.0;
    std::size_t cases = 0;
    std::string detail;

    void record(double err) {
        ++cases;
        if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
        max_error = std::max(max_error, err);
    }
    void require(bool ok, const std::string& what) {
        record(ok ? 0.0 : 1.0);
        if (!ok && detail.empty()) detail = what;
    }
};

struct Property {
    const char* name;
    double tolerance;
    std::function<Outcome(const VerifyOptions&)> run;
};

double rel_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    if (num == 0.0) return 0.0;
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

double state_diff(const MemoryState& a, const MemoryState& b) {
    if (a.frames_absorbed != b.frames_absorbed) return std::numeric_limits<double>::infinity();
    return std::max(rel_diff(a.m_kv.data(), b.m_kv.data()), rel_diff(a.m_k, b.m_k));
}

DenseMatrix rows_of(const DenseMatrix& m, std::size_t begin, std::size_t end) {
    DenseMatrix out(end - begin, m.cols());
    for (std::size_t i = begin; i < end; ++i)
        std::copy(m.row(i).begin(), m.row(i).end(), out.row(i - begin).begin());
    return out;
}

// Direct sum: the frame `age` steps back (newest = 1) weighs gamma^age.
MemoryState direct_memory(const DenseMatrix& k, const DenseMatrix& v, double gamma) {
    MemoryState m = memory_init(k.cols(), gamma);
    const std::size_t n = k.rows();
    for (std::size_t s = 0; s < n; ++s) {
        const double w = std::pow(gamma, static_cast<double>(n - s));
        const Vector pk = softmax(k.row(s));
        for (std::size_t r = 0; r < pk.size(); ++r) {
            m.m_k[r] += w * pk[r];
            for (std::size_t c = 0; c < v.cols(); ++c) m.m_kv(r, c) += w * pk[r] * v(s, c);
        }
    }
    m.frames_absorbed = n;
    return m;
}

MemoryState absorb_partition(const DenseMatrix& k, const DenseMatrix& v, double gamma,
                             const std::vector<std::size_t>& cuts) {
    MemoryState m = memory_init(k.cols(), gamma);
    std::size_t begin = 0;
    for (std::size_t end : cuts) {
        m = memory_update(m, rows_of(k, begin, end), rows_of(v, begin, end));
        begin = end;
    }
    return m;
}

std::vector<std::size_t> random_cuts(std::size_t n, SeededRng& rng) {
    std::vector<std::size_t> cuts;
    std::size_t pos = 0;
    while (pos < n) {
        pos = std::min(n, pos + 1 + rng.index(std::max<std::size_t>(1, n / 3)));
        cuts.push_back(pos);
    }
    return cuts;
}

// out_i = sum_j s_ij v_j / sum_j s_ij with s_ij = phi(q_i) . phi(k_j).
DenseMatrix pairwise_attention(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix& v) {
    DenseMatrix out(q.rows(), v.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const Vector pq = softmax(q.row(i));
        double den = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            const Vector pk = softmax(k.row(j));
            double s = 0.0;
            for (std::size_t r = 0; r < pq.size(); ++r) s += pq[r] * pk[r];
            den += s;
            for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += s * v(j, c);
        }
        for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) /= den;
    }
    return out;
}

// Scaled dot-product softmax attention of each query over the given keys.
Vector softmax_attend(std::span<const double> q, const std::vector<Vector>& keys, const std::vector<Vector>& values) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.size()));
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> logits;
    for (const auto& k : keys) {
        double s = 0.0;
        for (std::size_t r = 0; r < q.size(); ++r) s += q[r] * k[r];
        logits.push_back(s * scale);
        mx = std::max(mx, s * scale);
    }
    Vector out(values.front().size(), 0.0);
    double z = 0.0;
    for (std::size_t j = 0; j < keys.size(); ++j) {
        const double w = std::exp(logits[j] - mx);
        z += w;
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * values[j][c];
    }
    for (auto& x : out) x /= z;
    return out;
}

template <typename T>
T pick(SeededRng& rng, std::initializer_list<T> xs) {
    return *(xs.begin() + rng.index(xs.size()));
}

Outcome chunk_invariance(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(11);
    for (std::size_t c = 0; c < o.cases; ++c) {
        const std::size_t d = pick<std::size_t>(rng, {1, 4, 16, 64});
        const double gamma = pick<double>(rng, {0.5, 0.9, 0.99});
        const std::size_t n = 1 + rng.index(96);
        const DenseMatrix k = rng.normal_matrix(n, d);
        const DenseMatrix v = rng.normal_matrix(n, d);
        std::vector<std::size_t> single{n};
        std::vector<std::size_t> per_frame(n);
        for (std::size_t i = 0; i < n; ++i) per_frame[i] = i + 1;
        const MemoryState reference = direct_memory(k, v, gamma);
        for (const auto& cuts : {single, per_frame, random_cuts(n, rng), random_cuts(n, rng)})
            out.record(state_diff(absorb_partition(k, v, gamma, cuts), reference));
    }
    return out;
}

Outcome stream_oracle(const VerifyOptions& o) {
    Outcome out;
    {
        MemoryState m = memory_init(1, 0.5);
        m = memory_update(m, DenseMatrix(1, 1, 0.3), DenseMatrix(1, 1, 1.0));
        m = memory_update(m, DenseMatrix(1, 1, -0.7), DenseMatrix(1, 1, 2.0));
        const FrameChunk y = memory_guided_attention(DenseMatrix(1, 1, 0.1), DenseMatrix(1, 1, 0.2),
                                                     DenseMatrix(1, 1, 3.0), m);
        out.record(std::abs(y(0, 0) - 4.25 / 1.75) / (4.25 / 1.75));
    }
    SeededRng rng = SeededRng(o.seed).derive(12);
    for (std::size_t c = 0; c < o.cases; ++c) {
        const std::size_t d = pick<std::size_t>(rng, {1, 4, 16});
        const double gamma = pick<double>(rng, {0.5, 0.9, 0.99});
        const std::size_t n_past = rng.index(5);
        std::vector<PastChunk> history;
        MemoryState m = memory_init(d, gamma);
        for (std::size_t p = 0; p < n_past; ++p) {
            const std::size_t f = 1 + rng.index(16);
            PastChunk chunk{rng.normal_matrix(f, d), rng.normal_matrix(f, d)};
            m = memory_update(m, chunk.k, chunk.v);
            history.push_back(std::move(chunk));
        }
        const std::size_t f = 1 + rng.index(16);
        const DenseMatrix q = rng.normal_matrix(f, d);
        const DenseMatrix k = rng.normal_matrix(f, d);
        const DenseMatrix v = rng.normal_matrix(f, d);
        out.record(rel_diff(memory_guided_attention(q, k, v, m).data(),
                            full_history_oracle(history, q, k, v, gamma).data()));
    }
    return out;
}

Outcome linear_vs_pairwise(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(13);
    for (std::size_t c = 0; c < o.cases; ++c) {
        const std::size_t d = pick<std::size_t>(rng, {1, 2, 4, 16, 32});
        const std::size_t f = 1 + rng.index(24);
        const DenseMatrix q = rng.normal_matrix(f, d, 2.0);
        const DenseMatrix k = rng.normal_matrix(f, d, 2.0);
        const DenseMatrix v = rng.normal_matrix(f, d);
        out.record(rel_diff(linear_attention(q, k, v).data(), pairwise_attention(q, k, v).data()));
    }
    for (std::size_t c = 0; c < 20; ++c) {
        const std::size_t d = 1 + rng.index(8);
        const DenseMatrix v = rng.normal_matrix(1, d);
        const FrameChunk y = linear_attention(rng.normal_matrix(1, d), rng.normal_matrix(1, d), v);
        out.require(y == v, "f=1 attention is not the identity on V");
    }
    return out;
}

Outcome constant_memory(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(14);
    const std::size_t d = 4;
    MemoryState m = memory_init(d, 0.9);
    const std::size_t empty_size = memory_to_bytes(m).size();
    double worst_ratio = 0.0;
    for (std::size_t clip = 0; clip < 625; ++clip) {
        m = memory_update(m, rng.normal_matrix(16, d), rng.normal_matrix(16, d, 3.0));
        const double bound = m.geometric_bound();
        worst_ratio = std::max(worst_ratio, frobenius_norm(m.m_kv) / bound);
    }
    out.require(m.frames_absorbed == 10000, "frame counter did not reach 10000");
    out.require(memory_to_bytes(m).size() == empty_size, "serialized size changed while streaming");
    out.require(memory_to_json(m).size() > 0 && memory_from_json(memory_to_json(m)) == m, "JSON round trip failed");
    out.record(std::max(0.0, worst_ratio - 1.0));
    return out;
}

Outcome flow_identities(const VerifyOptions& o) {
    Outcome out;
    out.require(loss_weight(0.0) == 1.0 && loss_weight(0.5) == 4.0, "lambda(0), lambda(0.5)");
    out.record(std::abs(loss_weight(0.9) - 100.0) / 100.0);
    SeededRng rng = SeededRng(o.seed).derive(15);
    for (std::size_t c = 0; c < 20; ++c) {
        const Vector z0 = rng.normal_vector(6);
        const Vector eps = rng.normal_vector(6);
        out.require(interpolate(z0, eps, 0.0) == z0, "interpolate(t=0) != z0");
        out.require(flow_loss(eps, eps, rng.uniform(0.0, 0.99)) == 0.0, "flow_loss(eps, eps) != 0");
    }
    return out;
}

Outcome gradient_check(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(16);
    DenoiserConfig cfg;
    for (std::size_t point = 0; point < 10; ++point) {
        ToyDenoiser model = ToyDenoiser::initialize(cfg, rng, false);
        const std::size_t f = 1 + rng.index(4);
        ConditionSet conds;
        conds.audio = rng.normal_matrix(f, cfg.audio_dim);
        conds.reference = rng.normal_vector(cfg.latent_dim);
        conds.emotion = emotion_from_index(rng.index(kEmotionCount));
        if (point % 3 == 1) conds.drop(ConditionKind::emotion);
        if (point % 3 == 2) conds.drop(ConditionKind::audio);
        MemoryState mem = memory_init(cfg.latent_dim, 0.9);
        mem = memory_update(mem, rng.normal_matrix(8, cfg.latent_dim), rng.normal_matrix(8, cfg.latent_dim));
        const MemoryState* mp = point % 2 == 0 ? &mem : nullptr;
        const FrameChunk z = rng.normal_matrix(f, cfg.latent_dim);
        const FrameChunk eps = rng.normal_matrix(f, cfg.latent_dim);
        const double t = rng.uniform(0.0, 0.95);
        const LossReduction red = point % 2 == 0 ? LossReduction::sum : LossReduction::mean;

        DenoiserParams grad = model.params().zeros_like();
        model.loss_and_gradient(z, eps, t, conds, mp, red, &grad);
        const Vector analytic = grad.flatten();
        Vector theta = model.params().flatten();
        Vector numeric(theta.size());
        const double h = 1e-5;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double keep = theta[i];
            theta[i] = keep + h;
            model.params().assign(theta);
            const double up = model.loss_and_gradient(z, eps, t, conds, mp, red, nullptr);
            theta[i] = keep - h;
            model.params().assign(theta);
            const double down = model.loss_and_gradient(z, eps, t, conds, mp, red, nullptr);
            theta[i] = keep;
            numeric[i] = (up - down) / (2.0 * h);
        }
        model.params().assign(theta);
        out.record(rel_diff(analytic, numeric));
    }
    return out;
}

Outcome cfg_identities(const VerifyOptions& o) {
    Outcome out;
    out.require(kDefaultCfgScale == 3.5, "default CFG scale is not 3.5");
    SeededRng rng = SeededRng(o.seed).derive(17);
    for (std::size_t c = 0; c < o.cases; ++c) {
        const std::size_t n = 1 + rng.index(32);
        const Vector a = rng.normal_vector(n, 3.0);
        const Vector b = rng.normal_vector(n, 3.0);
        const double w = rng.uniform(-2.0, 8.0);
        out.require(cfg_blend(a, b, 0.0) == a, "cfg(w=0) != conditional");
        out.require(cfg_blend(a, b, -1.0) == b, "cfg(w=-1) != unconditional");
        out.require(cfg_blend(a, a, w) == a, "cfg(x, x, w) != x");
        Vector expect(n);
        for (std::size_t i = 0; i < n; ++i) expect[i] = a[i] + w * (a[i] - b[i]);
        out.record(rel_diff(cfg_blend(a, b, w), expect));
        // Linearity in the pair (a, b).
        const Vector a2 = rng.normal_vector(n);
        const Vector b2 = rng.normal_vector(n);
        Vector sa(n), sb(n);
        for (std::size_t i = 0; i < n; ++i) {
            sa[i] = a[i] + a2[i];
            sb[i] = b[i] + b2[i];
        }
        const Vector lhs = cfg_blend(sa, sb, w);
        const Vector p1 = cfg_blend(a, b, w);
        const Vector p2 = cfg_blend(a2, b2, w);
        Vector rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = p1[i] + p2[i];
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale = std::max({scale, std::abs(p1[i]), std::abs(p2[i])});
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(lhs[i] - rhs[i]) / std::max(scale, 1e-300));
        out.record(err);
    }
    return out;
}

Outcome robust_fixture(const VerifyOptions&) {
    Outcome out;
    const double losses[] = {0.03, 0.11, 0.1, std::numeric_limits<double>::quiet_NaN()};
    const RobustVerdict expect[] = {{RobustDecision::keep, false},
                                    {RobustDecision::skip, false},
                                    {RobustDecision::keep, false},
                                    {RobustDecision::skip, true}};
    for (std::size_t i = 0; i < 4; ++i)
        out.require(robust_filter(losses[i], kDefaultRobustThreshold) == expect[i], "robust filter fixture mismatch");
    return out;
}

Outcome adaln_zero_init(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(18);
    for (std::size_t c = 0; c < 50; ++c) {
        const std::size_t d = 2 + rng.index(15);
        const auto table = EmotionEmbeddingTable::random(kDefaultEmotionEmbeddingDim, rng);
        const auto mod = AdaLnModulation::zero_init(kDefaultEmotionEmbeddingDim, 16, d, rng);
        const TokenSequence x = TokenSequence::from_rows(rng.normal_matrix(1 + rng.index(6), d, 2.0), Modality::video);
        const TokenSequence y = emotion_adaln(x, table.lookup(emotion_from_index(rng.index(kEmotionCount))), mod);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Vector ln = layer_norm(x.tokens[i], kLayerNormEps);
            double err = 0.0;
            for (std::size_t r = 0; r < d; ++r) err = std::max(err, std::abs(y.tokens[i][r] - ln[r]));
            out.record(err);
        }
    }
    return out;
}

Outcome adaln_sensitivity(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(19);
    const std::size_t d = 8;
    const auto table = EmotionEmbeddingTable::random(kDefaultEmotionEmbeddingDim, rng);
    const auto mod = AdaLnModulation::random(kDefaultEmotionEmbeddingDim, 16, d, rng, 0.5);
    const TokenSequence x = TokenSequence::from_rows(rng.normal_matrix(4, d), Modality::video);
    std::vector<TokenSequence> outs;
    for (auto e : all_emotions()) outs.push_back(emotion_adaln(x, table.lookup(e), mod));
    for (std::size_t a = 0; a < outs.size(); ++a)
        for (std::size_t b = a + 1; b < outs.size(); ++b)
            out.require(outs[a].tokens != outs[b].tokens, "two emotions give identical AdaLN output");
    return out;
}

Outcome attention_oracles(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(20);
    for (std::size_t c = 0; c < o.cases; ++c) {
        const std::size_t d = 2 + rng.index(7);
        const auto proj = AttentionProjections::random(d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
        const std::size_t nv = 1 + rng.index(5);
        const std::size_t na = 1 + rng.index(5);
        TokenSequence video = TokenSequence::from_rows(rng.normal_matrix(nv, d), Modality::video);
        TokenSequence audio = TokenSequence::from_rows(rng.normal_matrix(na, d), Modality::audio);
        if (na > 1 && rng.uniform() < 0.5) audio.mask[rng.index(na)] = false;

        auto q_of = [&](const Vector& x) { return matvec(proj.w_q, x); };
        auto k_of = [&](const Vector& x) { return matvec(proj.w_k, x); };
        auto v_of = [&](const Vector& x) { return matvec(proj.w_v, x); };

        // Cross attention: video queries, unmasked audio keys/values.
        std::vector<Vector> ak, av;
        for (std::size_t j = 0; j < na; ++j)
            if (audio.mask[j]) {
                ak.push_back(k_of(audio.tokens[j]));
                av.push_back(v_of(audio.tokens[j]));
            }
        const TokenSequence cross = cross_attention(video, audio, proj);
        for (std::size_t i = 0; i < nv; ++i)
            out.record(rel_diff(cross.tokens[i], softmax_attend(q_of(video.tokens[i]), ak, av)));

        // Joint attention over every unmasked token.
        const TokenSequence joint = concat_video_audio(video, audio);
        std::vector<Vector> jk, jv;
        for (std::size_t j = 0; j < joint.size(); ++j)
            if (joint.mask[j]) {
                jk.push_back(k_of(joint.tokens[j]));
                jv.push_back(v_of(joint.tokens[j]));
            }
        const TokenSequence mm = multimodal_attention(joint, proj);
        for (std::size_t i = 0; i < joint.size(); ++i)
            if (joint.mask[i]) out.record(rel_diff(mm.tokens[i], softmax_attend(q_of(joint.tokens[i]), jk, jv)));
    }
    return out;
}

Outcome attention_mask_reduction(const VerifyOptions& o) {
    Outcome out;
    SeededRng rng = SeededRng(o.seed).derive(21);
    for (std::size_t c = 0; c < 50; ++c) {
        const std::size_t d = 2 + rng.index(7);
        const auto proj = AttentionProjections::random(d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
        const TokenSequence video = TokenSequence::from_rows(rng.normal_matrix(1 + rng.index(5), d), Modality::video);
        TokenSequence audio = TokenSequence::from_rows(rng.normal_matrix(1 + rng.index(5), d), Modality::audio);
        std::fill(audio.mask.begin(), audio.mask.end(), false);
        const TokenSequence joint = multimodal_attention(concat_video_audio(video, audio), proj);
        const TokenSequence alone = multimodal_attention(video, proj);
        for (std::size_t i = 0; i < video.size(); ++i) {
            double err = 0.0;
            for (std::size_t r = 0; r < d; ++r) err = std::max(err, std::abs(joint.tokens[i][r] - alone.tokens[i][r]));
            out.record(err);
        }
    }
    return out;
}

Outcome emotion_protocol(const VerifyOptions&) {
    Outcome out;
    out.require(all_emotions().size() == 8, "label space is not 8 labels");
    const auto w = emotion_window(300, 30.0, 0);
    out.require(w.first == 0 && w.second == 46, "frame-0 window is not [0, 1.5 s]");
    const auto w2 = emotion_window(300, 30.0, 299);
    out.require(w2.first == 254 && w2.second == 300, "last-frame window is not clamped");
    const EmotionLabel tie[] = {EmotionLabel::sad, EmotionLabel::happy};
    out.require(subsegment_vote(tie) == EmotionLabel::happy, "vote tie does not pick the lowest index");
    EmotionProbabilities p{};
    p[index_of(EmotionLabel::happy)] = 0.5;
    p[index_of(EmotionLabel::sad)] = 0.5;
    out.require(argmax_label(p) == EmotionLabel::happy, "argmax tie does not pick the lowest index");
    const EmotionTimeline tl = timeline_from_labels(std::vector<EmotionLabel>(33, EmotionLabel::neutral), 30.0, 16);
    out.require(tl.subsegments.size() == 3 && tl.subsegments[0].end_frame == 16 && tl.subsegments[1].end_frame == 32 &&
                    tl.subsegments[2].end_frame == 33,
                "33-frame timeline is not split 16/16/1");
    const LabelMergeTable table = LabelMergeTable::builtin();
    out.require(merge_label("ASVP-ESD", "pleasure", table) == EmotionLabel::happy, "pleasure -> happy");
    out.require(merge_label("ASVP-ESD", "boredom", table) == EmotionLabel::others, "unknown -> others");
    return out;
}

// Keep decision of one trimmed record, written as a single predicate.
bool oracle_keep(const ClipRecord& r, const Thresholds& th) {
    return r.parse_error.empty() && std::isfinite(r.duration_s) && r.duration_s > 0.0 && r.face_count &&
           r.face_partial && r.bbox && r.iqa_score && r.sync_c && *r.face_count >= th.min_faces &&
           *r.face_count <= th.max_faces && !*r.face_partial && *r.iqa_score > th.iqa_min &&
           *r.sync_c > th.sync_c_min && r.manual_ok.value_or(true);
}

std::set<std::string> oracle_kept_ids(const std::vector<ClipRecord>& manifest, const Thresholds& th) {
    std::set<std::string> ids;
    for (const auto& r : manifest) {
        if (r.duration_s >= th.max_clip_s) {
            const auto n = static_cast<std::size_t>(r.duration_s / th.max_clip_s) + 1;
            for (std::size_t k = 0; k < n; ++k) {
                ClipRecord piece = r;
                piece.duration_s = r.duration_s / static_cast<double>(n);
                if (oracle_keep(piece, th)) ids.insert(r.clip_id + "#" + std::to_string(k));
            }
        } else if (oracle_keep(r, th)) {
            ids.insert(r.clip_id);
        }
    }
    return ids;
}

std::set<std::string> kept_ids(const PipelineResult& res) {
    std::set<std::string> ids;
    for (const auto& r : res.kept) ids.insert(r.clip_id);
    return ids;
}

Outcome pipeline_boundaries(const VerifyOptions&) {
    Outcome out;
    const Thresholds th;
    ClipRecord r;
    r.clip_id = "b";
    r.duration_s = 10.0;
    r.face_count = 1;
    r.face_partial = false;
    r.bbox = BoundingBox{0.4, 0.4, 0.2, 0.2};
    r.sync_c = 6.0;
    for (double iqa : {39.0, 40.0, 41.0}) {
        r.iqa_score = iqa;
        out.require(iqa_gate(r, th).keep == (iqa > 40.0), "IQA boundary");
    }
    r.iqa_score = 50.0;
    for (double s : {4.9, 5.0, 5.1}) {
        r.sync_c = s;
        out.require(sync_gate(r, th).keep == (s > 5.0), "Sync-C boundary");
    }
    const Scorers none;
    for (double dur : {29.0, 31.0, 90.0}) {
        r.duration_s = dur;
        const auto pieces = scene_trim(r, none, th.max_clip_s);
        const std::size_t expect_n = dur == 29.0 ? 1 : (dur == 31.0 ? 2 : 4);
        out.require(pieces.size() == expect_n, "trim piece count");
        double total = 0.0;
        for (const auto& p : pieces) {
            out.require(p.duration_s < th.max_clip_s, "trimmed piece not below max");
            out.require(p.duration_s == dur / static_cast<double>(expect_n), "uneven trim piece");
            total += p.duration_s;
        }
        out.record(std::abs(total - dur) > 1e-6 ? 1.0 : 0.0);
    }
    const BoundingBox b = scale_bbox({0.4, 0.4, 0.2, 0.2}, 1.1);
    const BoundingBox want{0.39, 0.39, 0.22, 0.22};
    double err = 0.0;
    for (std::size_t i = 0; i < 4; ++i) err = std::max(err, std::abs(b[i] - want[i]));
    out.record(err);
    return out;
}

Outcome pipeline_oracle(const VerifyOptions& o) {
    Outcome out;
    const Thresholds th;
    const auto manifest = synthetic_manifest(100, o.seed);
    const PipelineResult res = run_pipeline(manifest, Scorers{}, th);
    out.require(kept_ids(res) == oracle_kept_ids(manifest, th), "kept set differs from brute-force oracle");
    std::size_t total = res.report.kept;
    for (const auto& [reason, n] : res.report.rejected) total += n;
    out.require(total == res.report.input_count, "report does not conserve records");
    const PipelineResult par = run_pipeline(manifest, Scorers{}, th, 4);
    out.require(kept_ids(par) == kept_ids(res) && par.report.rejected == res.report.rejected,
                "parallel run differs");
    return out;
}

Outcome pipeline_idempotence(const VerifyOptions& o) {
    Outcome out;
    const Thresholds th;
    const PipelineResult first = run_pipeline(synthetic_manifest(100, o.seed), Scorers{}, th);
    const PipelineResult second = run_pipeline(first.kept, Scorers{}, th);
    std::ostringstream a, b;
    write_manifest(a, first.kept);
    write_manifest(b, second.kept);
    out.require(a.str() == b.str(), "second pass changed the kept manifest");
    return out;
}

Outcome pipeline_monotonicity(const VerifyOptions& o) {
    Outcome out;
    const auto manifest = synthetic_manifest(100, o.seed);
    SeededRng rng = SeededRng(o.seed).derive(22);
    for (std::size_t c = 0; c < 20; ++c) {
        Thresholds loose;
        loose.iqa_min = rng.uniform(30.0, 50.0);
        loose.sync_c_min = rng.uniform(3.0, 7.0);
        Thresholds tight = loose;
        tight.iqa_min += rng.uniform(0.0, 10.0);
        tight.sync_c_min += rng.uniform(0.0, 2.0);
        const auto kl = kept_ids(run_pipeline(manifest, Scorers{}, loose));
        const auto kt = kept_ids(run_pipeline(manifest, Scorers{}, tight));
        out.require(std::includes(kl.begin(), kl.end(), kt.begin(), kt.end()), "tightening grew the kept set");
    }
    return out;
}

const std::vector<Property>& registry() {
    static const std::vector<Property> props = {
        {"memory.chunk_invariance", 1e-9, chunk_invariance},
        {"memory.stream_oracle", 1e-9, stream_oracle},
        {"memory.linear_vs_pairwise", 1e-9, linear_vs_pairwise},
        {"memory.constant_size", 0.0, constant_memory},
        {"flow.identities", 1e-15, flow_identities},
        {"flow.gradient_check", 1e-5, gradient_check},
        {"cfg.identities", 1e-12, cfg_identities},
        {"robust.filter_fixture", 0.0, robust_fixture},
        {"adaln.zero_init_identity", 1e-12, adaln_zero_init},
        {"adaln.emotion_sensitivity", 0.0, adaln_sensitivity},
        {"attention.softmax_oracles", 1e-9, attention_oracles},
        {"attention.mask_reduction", 1e-12, attention_mask_reduction},
        {"emotion.protocol", 0.0, emotion_protocol},
        {"pipeline.boundaries", 1e-12, pipeline_boundaries},
        {"pipeline.brute_force", 0.0, pipeline_oracle},
        {"pipeline.idempotence", 0.0, pipeline_idempotence},
        {"pipeline.monotonicity", 0.0, pipeline_monotonicity},
    };
    return props;
}

}  // namespace

bool VerifyReport::all_passed() const noexcept {
    return std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.passed; });
}

nlohmann::ordered_json VerifyReport::to_json(bool with_timing) const {
    nlohmann::ordered_json j;
    j["passed"] = all_passed();
    auto& arr = j["properties"] = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json p;
        p["name"] = r.name;
        p["status"] = r.passed ? "pass" : "fail";
        p["max_error"] = std::isfinite(r.max_error) ? nlohmann::ordered_json(r.max_error) : nlohmann::ordered_json("inf");
        p["tolerance"] = r.tolerance;
        p["cases_run"] = r.cases_run;
        if (with_timing) p["wall_time_s"] = r.wall_time_s;
        if (!r.detail.empty()) p["detail"] = r.detail;
        arr.push_back(std::move(p));
    }
    return j;
}

std::vector<std::string> property_names() {
    std::vector<std::string> names;
    for (const auto& p : registry()) names.emplace_back(p.name);
    return names;
}

VerifyReport run_verify(const VerifyOptions& options) {
    VerifyReport report;
    for (const auto& prop : registry()) {
        if (!options.filter.empty() && std::string_view(prop.name).find(options.filter) == std::string_view::npos) continue;
        PropertyResult r;
        r.name = prop.name;
        r.tolerance = prop.tolerance;
        const auto start = std::chrono::steady_clock::now();
        try {
            const Outcome o = prop.run(options);
            r.max_error = o.max_error;
            r.cases_run = o.cases;
            r.detail = o.detail;
            r.passed = o.cases > 0 && o.max_error <= prop.tolerance && o.detail.empty();
        } catch (const std::exception& e) {
            r.passed = false;
            r.max_error = std::numeric_limits<double>::infinity();
            r.detail = std::string("threw: ") + e.what();
        }
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.results.push_back(std::move(r));
    }
    return report;
}

}  // namespace memo
