// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "memo/multimodal_attention.hpp"
#include "test_support.hpp"

namespace memo {
namespace {

using test::max_rel_err;

using test::mat_vec;
using test::oracle_attention;
using test::oracle_layer_norm;

TokenSequence random_tokens(SeededRng& rng, std::size_t n, std::size_t d, Modality m) {
    return TokenSequence::from_rows(test::random_matrix(rng, n, d, 2.0), m);
}

TEST(MultimodalAttention, MatchesSoftmaxOracle) {
    SeededRng rng(301);
    for (int c = 0; c < 50; ++c) {
        const std::size_t d = 1 + rng.index(8);
        const auto video = random_tokens(rng, 1 + rng.index(6), d, Modality::video);
        const auto audio = random_tokens(rng, 1 + rng.index(6), d, Modality::audio);
        const auto proj = AttentionProjections::random(d, rng, 0.7);
        const auto joint = concat_video_audio(video, audio);
        const auto got = multimodal_attention(joint, proj);
        const auto want = oracle_attention(proj, joint.tokens, joint.tokens);
        for (std::size_t i = 0; i < joint.size(); ++i) EXPECT_LT(max_rel_err(got.tokens[i], want[i]), 1e-9);
    }
}

TEST(CrossAttention, MatchesSoftmaxOracle) {
    SeededRng rng(303);
    for (int c = 0; c < 50; ++c) {
        const std::size_t d = 1 + rng.index(8);
        const auto video = random_tokens(rng, 1 + rng.index(6), d, Modality::video);
        const auto audio = random_tokens(rng, 1 + rng.index(6), d, Modality::audio);
        const auto proj = AttentionProjections::random(d, rng, 0.7);
        const auto got = cross_attention(video, audio, proj);
        const auto want = oracle_attention(proj, video.tokens, audio.tokens);
        for (std::size_t i = 0; i < video.size(); ++i) EXPECT_LT(max_rel_err(got.tokens[i], want[i]), 1e-9);
    }
}

TEST(MultimodalAttention, MaskedAudioReducesToVideoSelfAttention) {
    SeededRng rng(307);
    for (int c = 0; c < 50; ++c) {
        const std::size_t d = 1 + rng.index(8);
        const auto video = random_tokens(rng, 1 + rng.index(6), d, Modality::video);
        auto audio = random_tokens(rng, 1 + rng.index(6), d, Modality::audio);
        for (std::size_t i = 0; i < audio.size(); ++i) audio.mask[i] = false;
        const auto proj = AttentionProjections::random(d, rng, 0.7);
        const auto joint = multimodal_attention(concat_video_audio(video, audio), proj);
        const auto self = multimodal_attention(video, proj);
        for (std::size_t i = 0; i < video.size(); ++i) {
            for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(joint.tokens[i][k], self.tokens[i][k], 1e-12);
        }
    }
}

TEST(MultimodalAttention, PermutationEquivariant) {
    SeededRng rng(311);
    const std::size_t d = 5;
    const auto joint = concat_video_audio(random_tokens(rng, 4, d, Modality::video), random_tokens(rng, 3, d, Modality::audio));
    const auto proj = AttentionProjections::random(d, rng, 0.5);
    const auto base = multimodal_attention(joint, proj);
    std::vector<std::size_t> perm{3, 6, 0, 5, 1, 4, 2};
    TokenSequence shuffled;
    for (auto i : perm) shuffled.push_back(joint.tokens[i], joint.modality[i], joint.mask[i]);
    const auto out = multimodal_attention(shuffled, proj);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_LT(max_rel_err(out.tokens[i], base.tokens[perm[i]]), 1e-12);
}

TEST(MultimodalAttention, Errors) {
    SeededRng rng(313);
    auto video = random_tokens(rng, 2, 3, Modality::video);
    const auto proj = AttentionProjections::random(3, rng, 0.5);
    auto masked = video;
    masked.mask = {false, false};
    EXPECT_THROW(multimodal_attention(masked, proj), std::invalid_argument);
    EXPECT_THROW(multimodal_attention(random_tokens(rng, 2, 4, Modality::video), proj), std::invalid_argument);
    auto audio = random_tokens(rng, 2, 3, Modality::audio);
    audio.mask = {false, false};
    EXPECT_THROW(cross_attention(video, audio, proj), std::invalid_argument);
    EXPECT_THROW(concat_video_audio(audio, video), std::invalid_argument);
}

TEST(SelectModality, SplitsJointSequence) {
    SeededRng rng(317);
    const auto video = random_tokens(rng, 3, 2, Modality::video);
    const auto audio = random_tokens(rng, 2, 2, Modality::audio);
    const auto joint = concat_video_audio(video, audio);
    EXPECT_EQ(select_modality(joint, Modality::video).tokens, video.tokens);
    EXPECT_EQ(select_modality(joint, Modality::audio).tokens, audio.tokens);
    EXPECT_EQ(joint.count(Modality::audio), 2u);
}

TEST(EmotionAdaLn, ZeroInitIsPlainLayerNorm) {
    SeededRng rng(331);
    for (int c = 0; c < 50; ++c) {
        const std::size_t d = 2 + rng.index(10);
        const auto table = EmotionEmbeddingTable::random(16, rng);
        const auto mod = AdaLnModulation::zero_init(16, 8, d, rng);
        const auto x = random_tokens(rng, 1 + rng.index(5), d, Modality::video);
        for (auto label : all_emotions()) {
            const auto out = emotion_adaln(x, table.lookup(label), mod);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const auto want = oracle_layer_norm(x.tokens[i], kLayerNormEps);
                for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(out.tokens[i][k], want[k], 1e-12);
            }
        }
    }
}

TEST(EmotionAdaLn, LabelsChangeOutputAfterRandomInit) {
    SeededRng rng(337);
    const std::size_t d = 6;
    const auto table = EmotionEmbeddingTable::random(16, rng);
    const auto mod = AdaLnModulation::random(16, 8, d, rng, 0.5);
    const auto x = random_tokens(rng, 3, d, Modality::video);
    for (std::size_t a = 0; a < kEmotionCount; ++a) {
        for (std::size_t b = a + 1; b < kEmotionCount; ++b) {
            const auto oa = emotion_adaln(x, table.lookup(all_emotions()[a]), mod);
            const auto ob = emotion_adaln(x, table.lookup(all_emotions()[b]), mod);
            double diff = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t k = 0; k < d; ++k) diff = std::max(diff, std::abs(oa.tokens[i][k] - ob.tokens[i][k]));
            EXPECT_GT(diff, 1e-6) << a << " vs " << b;
        }
    }
}

TEST(EmotionAdaLn, MatchesModulationOracle) {
    SeededRng rng(347);
    const std::size_t d = 4, e = 5, h = 3;
    const auto mod = AdaLnModulation::random(e, h, d, rng, 0.5);
    const auto emb = rng.normal_vector(e);
    const auto x = random_tokens(rng, 2, d, Modality::audio);
    std::vector<double> hidden = mat_vec(mod.w_hidden, emb);
    for (std::size_t i = 0; i < h; ++i) hidden[i] = std::tanh(hidden[i] + mod.b_hidden[i]);
    const auto raw = mat_vec(mod.w_out, hidden);
    const auto out = emotion_adaln(x, emb, mod);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto n = oracle_layer_norm(x.tokens[i], kLayerNormEps);
        for (std::size_t k = 0; k < d; ++k) {
            const double want = (1.0 + raw[k] + mod.b_out[k]) * n[k] + raw[d + k] + mod.b_out[d + k];
            EXPECT_NEAR(out.tokens[i][k], want, 1e-12);
        }
    }
}

TEST(EmotionAdaLn, EmbeddingDimMismatchThrows) {
    SeededRng rng(349);
    const auto mod = AdaLnModulation::zero_init(8, 4, 3, rng);
    const auto x = random_tokens(rng, 2, 3, Modality::video);
    EXPECT_THROW(emotion_adaln(x, std::vector<double>(7, 0.0), mod), std::invalid_argument);
}

}  // namespace
}  // namespace memo
