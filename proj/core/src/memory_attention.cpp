// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/memory_attention.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace memo {

namespace {

void require_same_shape(const FrameChunk& a, const FrameChunk& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(what) + ": chunk shape mismatch (" + std::to_string(a.rows()) +
                                    "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

void require_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("memory: gamma must lie in (0, 1), got " + std::to_string(gamma));
    }
}

// Numerator/denominator contraction shared by every attention variant here.
FrameChunk contract(const FrameChunk& q, const DenseMatrix& kv, std::span<const double> ksum) {
    FrameChunk out(q.rows(), kv.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const Vector pq = feature_map(q.row(i));
        const double den = dot(pq, ksum) + kDenominatorGuard;
        const Vector num = matvec_transposed(kv, pq);
        auto o = out.row(i);
        for (std::size_t c = 0; c < num.size(); ++c) o[c] = num[c] / den;
    }
    return out;
}

void accumulate_clip(const FrameChunk& k, const FrameChunk& v, DenseMatrix& kv, Vector& ksum) {
    for (std::size_t j = 0; j < k.rows(); ++j) {
        const Vector pk = feature_map(k.row(j));
        add_outer(kv, pk, v.row(j));
        for (std::size_t r = 0; r < pk.size(); ++r) ksum[r] += pk[r];
    }
}

double decay_of_old_state(double gamma, std::size_t added) {
#ifdef MEMO_MUTATION_DECAY_SIGN
    // Deliberately wrong; only compiled into the mutation-test build.
    return std::pow(gamma, -static_cast<double>(added));
#else
    return std::pow(gamma, static_cast<double>(added));
#endif
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t x) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(x >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t u64() {
        if (pos_ + 8 > bytes_.size()) throw std::runtime_error("memory_from_bytes: truncated record");
        std::uint64_t x = 0;
        for (int b = 0; b < 8; ++b) x |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
        pos_ += 8;
        return x;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

constexpr std::uint64_t kMagic = 0x5354534d4f4d454dULL;  // "MEMOMSTS"

}  // namespace

void AttentionProjections::validate() const {
    const std::size_t d = w_q.rows();
    for (const auto* w : {&w_q, &w_k, &w_v}) {
        if (w->rows() != d || w->cols() != d) throw std::invalid_argument("AttentionProjections: must be square d x d");
        require_finite(w->data(), "AttentionProjections");
    }
}

AttentionProjections AttentionProjections::identity(std::size_t d) {
    return {DenseMatrix::identity(d), DenseMatrix::identity(d), DenseMatrix::identity(d)};
}

AttentionProjections AttentionProjections::random(std::size_t d, SeededRng& rng, double scale) {
    AttentionProjections p;
    p.w_q = rng.normal_matrix(d, d, scale);
    p.w_k = rng.normal_matrix(d, d, scale);
    p.w_v = rng.normal_matrix(d, d, scale);
    return p;
}

ProjectedChunk project(const FrameChunk& features, const AttentionProjections& proj) {
    if (features.cols() != proj.dim()) throw std::invalid_argument("project: feature dim != projection dim");
    const DenseMatrix wq_t = transpose(proj.w_q);
    const DenseMatrix wk_t = transpose(proj.w_k);
    const DenseMatrix wv_t = transpose(proj.w_v);
    return {matmul(features, wq_t), matmul(features, wk_t), matmul(features, wv_t)};
}

Vector feature_map(std::span<const double> v) {
    return softmax(v);
}

FrameChunk linear_attention(const FrameChunk& q, const FrameChunk& k, const FrameChunk& v) {
    require_same_shape(q, k, "linear_attention");
    require_same_shape(q, v, "linear_attention");
    if (q.rows() == 0) throw std::invalid_argument("linear_attention: empty chunk");
    // One frame attends only to itself: phi(q).phi(k) cancels exactly.
    if (q.rows() == 1) return v;
    const std::size_t d = q.cols();
    DenseMatrix kv(d, d);
    Vector ksum(d, 0.0);
    accumulate_clip(k, v, kv, ksum);
    return contract(q, kv, ksum);
}

double MemoryState::geometric_bound() const {
    const double n = static_cast<double>(frames_absorbed);
    return max_frame_norm * gamma * (1.0 - std::pow(gamma, n)) / (1.0 - gamma);
}

MemoryState memory_init(std::size_t d, double gamma) {
    require_gamma(gamma);
    if (d == 0) throw std::invalid_argument("memory_init: d must be >= 1");
    MemoryState s;
    s.m_kv = DenseMatrix(d, d);
    s.m_k = Vector(d, 0.0);
    s.gamma = gamma;
    return s;
}

MemoryState memory_update(const MemoryState& state, const FrameChunk& keys, const FrameChunk& values) {
    require_same_shape(keys, values, "memory_update");
    const std::size_t d = state.dim();
    if (keys.cols() != d) throw std::invalid_argument("memory_update: chunk dim != memory dim");
    const std::size_t a = keys.rows();
    if (a == 0) throw std::invalid_argument("memory_update: empty chunk");
    require_gamma(state.gamma);

    MemoryState next = state;
    const double old_scale = decay_of_old_state(state.gamma, a);
    for (auto& x : next.m_kv.data()) x *= old_scale;
    for (auto& x : next.m_k) x *= old_scale;

    for (std::size_t s = 0; s < a; ++s) {
        // Storage row s is (a - s) steps back from the end of the chunk.
        const double w = std::pow(state.gamma, static_cast<double>(a - s));
        const Vector pk = feature_map(keys.row(s));
        const auto v = values.row(s);
        add_outer(next.m_kv, pk, v, w);
        for (std::size_t r = 0; r < d; ++r) next.m_k[r] += w * pk[r];
        next.max_frame_norm = std::max(next.max_frame_norm, l2_norm(pk) * l2_norm(v));
    }
    next.frames_absorbed += a;
    return next;
}

FrameChunk memory_guided_attention(const FrameChunk& q, const FrameChunk& k, const FrameChunk& v,
                                   const MemoryState& state) {
    require_same_shape(q, k, "memory_guided_attention");
    require_same_shape(q, v, "memory_guided_attention");
    if (q.rows() == 0) throw std::invalid_argument("memory_guided_attention: empty chunk");
    if (q.cols() != state.dim()) throw std::invalid_argument("memory_guided_attention: chunk dim != memory dim");
    if (state.frames_absorbed == 0) return linear_attention(q, k, v);
    DenseMatrix kv = state.m_kv;
    Vector ksum = state.m_k;
    accumulate_clip(k, v, kv, ksum);
    return contract(q, kv, ksum);
}

FrameChunk full_history_oracle(std::span<const PastChunk> past, const FrameChunk& q, const FrameChunk& k,
                               const FrameChunk& v, double gamma) {
    require_same_shape(q, k, "full_history_oracle");
    require_same_shape(q, v, "full_history_oracle");
    const std::size_t d = q.cols();

    // Flatten the history newest-first so index p has age p + 1.
    std::vector<std::pair<std::span<const double>, std::span<const double>>> history;
    for (auto chunk = past.rbegin(); chunk != past.rend(); ++chunk) {
        require_same_shape(chunk->k, chunk->v, "full_history_oracle");
        if (chunk->k.cols() != d) throw std::invalid_argument("full_history_oracle: past dim mismatch");
        for (std::size_t s = chunk->k.rows(); s-- > 0;) history.emplace_back(chunk->k.row(s), chunk->v.row(s));
    }

    FrameChunk out(q.rows(), d);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const Vector pq = feature_map(q.row(i));
        Vector num(d, 0.0);
        double den = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            const double s = dot(pq, feature_map(k.row(j)));
            for (std::size_t c = 0; c < d; ++c) num[c] += s * v(j, c);
            den += s;
        }
        for (std::size_t p = 0; p < history.size(); ++p) {
            const double w = std::pow(gamma, static_cast<double>(p + 1));
            const double s = w * dot(pq, feature_map(history[p].first));
            for (std::size_t c = 0; c < d; ++c) num[c] += s * history[p].second[c];
            den += s;
        }
        den += kDenominatorGuard;
        for (std::size_t c = 0; c < d; ++c) out(i, c) = num[c] / den;
    }
    return out;
}

std::string memory_to_json(const MemoryState& state) {
    nlohmann::json j;
    j["version"] = kMemoryStateVersion;
    j["d"] = state.dim();
    j["gamma"] = state.gamma;
    j["frames_absorbed"] = state.frames_absorbed;
    j["max_frame_norm"] = state.max_frame_norm;
    j["m_kv"] = state.m_kv.data();
    j["m_k"] = state.m_k;
    return j.dump();
}

MemoryState memory_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    const auto version = j.at("version").get<std::uint32_t>();
    if (version != kMemoryStateVersion) {
        throw std::runtime_error("memory_from_json: unsupported version " + std::to_string(version));
    }
    const auto d = j.at("d").get<std::size_t>();
    MemoryState s;
    s.gamma = j.at("gamma").get<double>();
    require_gamma(s.gamma);
    s.frames_absorbed = j.at("frames_absorbed").get<std::uint64_t>();
    s.max_frame_norm = j.at("max_frame_norm").get<double>();
    s.m_kv = DenseMatrix(d, d, j.at("m_kv").get<std::vector<double>>());
    s.m_k = j.at("m_k").get<Vector>();
    if (s.m_k.size() != d) throw std::runtime_error("memory_from_json: m_k length != d");
    return s;
}

std::size_t memory_serialized_size(std::size_t d) {
    // magic, version, d, gamma, frames_absorbed, max_frame_norm, then payload
    return 8 * (6 + d * d + d);
}

std::vector<std::uint8_t> memory_to_bytes(const MemoryState& state) {
    std::vector<std::uint8_t> out;
    out.reserve(memory_serialized_size(state.dim()));
    put_u64(out, kMagic);
    put_u64(out, kMemoryStateVersion);
    put_u64(out, state.dim());
    put_f64(out, state.gamma);
    put_u64(out, state.frames_absorbed);
    put_f64(out, state.max_frame_norm);
    for (double x : state.m_kv.data()) put_f64(out, x);
    for (double x : state.m_k) put_f64(out, x);
    return out;
}

MemoryState memory_from_bytes(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    if (in.u64() != kMagic) throw std::runtime_error("memory_from_bytes: bad magic");
    if (const auto version = in.u64(); version != kMemoryStateVersion) {
        throw std::runtime_error("memory_from_bytes: unsupported version " + std::to_string(version));
    }
    const auto d = static_cast<std::size_t>(in.u64());
    if (bytes.size() != memory_serialized_size(d)) throw std::runtime_error("memory_from_bytes: length mismatch");
    MemoryState s;
    s.gamma = in.f64();
    require_gamma(s.gamma);
    s.frames_absorbed = in.u64();
    s.max_frame_norm = in.f64();
    s.m_kv = DenseMatrix(d, d);
    for (auto& x : s.m_kv.data()) x = in.f64();
    s.m_k.resize(d);
    for (auto& x : s.m_k) x = in.f64();
    return s;
}

}  // namespace memo
