// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "memo/emotion.hpp"

namespace memo {
namespace {

using L = EmotionLabel;

EmotionProbabilities one_hot(L label) {
    EmotionProbabilities p{};
    p[index_of(label)] = 1.0;
    return p;
}

AudioTimeline silent_audio(std::size_t frames, double fps = 30.0) {
    AudioTimeline a;
    a.frame_rate = fps;
    a.features = DenseMatrix(frames, 2);
    for (std::size_t i = 0; i < frames; ++i) a.features(i, 0) = static_cast<double>(i);
    return a;
}

// Brute-force modal label: highest count, lowest canonical index on ties.
L oracle_vote(const std::vector<L>& labels) {
    std::array<int, kEmotionCount> counts{};
    for (auto l : labels) ++counts[index_of(l)];
    std::size_t best = 0;
    for (std::size_t i = 1; i < kEmotionCount; ++i)
        if (counts[i] > counts[best]) best = i;
    return emotion_from_index(best);
}

TEST(EmotionLabels, ExactlyEightCanonical) {
    EXPECT_EQ(kEmotionCount, 8u);
    const std::vector<std::string> names{"angry", "disgusted", "fearful", "happy", "neutral", "sad", "surprised", "others"};
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        EXPECT_EQ(to_string(all_emotions()[i]), names[i]);
        EXPECT_EQ(index_of(all_emotions()[i]), i);
        EXPECT_EQ(parse_emotion(names[i]), all_emotions()[i]);
    }
    EXPECT_FALSE(parse_emotion("bored").has_value());
    EXPECT_THROW(emotion_from_index(8), std::out_of_range);
}

TEST(ArgmaxLabel, TieBreaksToLowestIndex) {
    EmotionProbabilities p{};
    p[index_of(L::happy)] = 0.5;
    p[index_of(L::sad)] = 0.5;
    EXPECT_EQ(argmax_label(p), L::happy);
}

TEST(ValidateProbabilities, RejectsBadRows) {
    EmotionProbabilities p{};
    EXPECT_THROW(validate_probabilities(p), std::invalid_argument);
    p[0] = 1.5;
    p[1] = -0.5;
    EXPECT_THROW(validate_probabilities(p), std::invalid_argument);
    EXPECT_NO_THROW(validate_probabilities(one_hot(L::sad)));
}

TEST(EmotionWindow, ClampedAtStart) {
    // 3 s at 30 fps: 45 frames either side of the centre.
    EXPECT_EQ(emotion_window(300, 30.0, 0), (std::pair<std::size_t, std::size_t>{0, 46}));
    EXPECT_EQ(emotion_window(300, 30.0, 100), (std::pair<std::size_t, std::size_t>{55, 146}));
    EXPECT_EQ(emotion_window(300, 30.0, 299), (std::pair<std::size_t, std::size_t>{254, 300}));
    EXPECT_EQ(emotion_window(10, 30.0, 5), (std::pair<std::size_t, std::size_t>{0, 10}));
}

TEST(EmotionWindow, Errors) {
    EXPECT_THROW(emotion_window(0, 30.0, 0), std::invalid_argument);
    EXPECT_THROW(emotion_window(10, 30.0, 10), std::out_of_range);
    EXPECT_THROW(emotion_window(10, 30.0, 0, 0.0), std::invalid_argument);
}

TEST(FrameEmotion, ClampedWindowSeenByClassifier) {
    const auto audio = silent_audio(300);
    std::vector<std::pair<std::size_t, std::size_t>> seen;
    FunctionClassifier probe([&](const AudioWindow& w) {
        seen.emplace_back(w.begin, w.end);
        // Window content decides the label so a wrong window changes the result.
        return w.values().front() == 0.0 && w.frames() == 46 ? one_hot(L::fearful) : one_hot(L::others);
    });
    EXPECT_EQ(frame_emotion(audio, 0, probe), L::fearful);
    ASSERT_EQ(seen.size(), 1u);
    EXPECT_EQ(seen[0], (std::pair<std::size_t, std::size_t>{0, 46}));
    // 1.5 s at 30 fps is frame 45, the last frame inside the clamped window.
    EXPECT_EQ(static_cast<double>(seen[0].second - 1) / audio.frame_rate, 1.5);
}

TEST(FrameEmotion, ConstantClassifier) {
    const auto audio = silent_audio(50);
    FunctionClassifier happy([](const AudioWindow&) { return one_hot(L::happy); });
    for (std::size_t f = 0; f < 50; ++f) EXPECT_EQ(frame_emotion(audio, f, happy), L::happy);
}

TEST(FrameEmotion, TieBetweenHappyAndSad) {
    const auto audio = silent_audio(5);
    FunctionClassifier tie([](const AudioWindow&) {
        EmotionProbabilities p{};
        p[index_of(L::sad)] = 0.5;
        p[index_of(L::happy)] = 0.5;
        return p;
    });
    EXPECT_EQ(frame_emotion(audio, 2, tie), L::happy);
}

TEST(FrameEmotion, InvalidClassifierOutputThrows) {
    const auto audio = silent_audio(5);
    FunctionClassifier broken([](const AudioWindow&) { return EmotionProbabilities{}; });
    EXPECT_THROW(frame_emotion(audio, 0, broken), std::invalid_argument);
}

TEST(SubsegmentVote, Examples) {
    EXPECT_EQ(subsegment_vote(std::vector<L>{L::happy, L::happy, L::sad}), L::happy);
    EXPECT_EQ(subsegment_vote(std::vector<L>{L::sad, L::happy}), L::happy);
    EXPECT_EQ(subsegment_vote(std::vector<L>(5, L::others)), L::others);
    EXPECT_THROW(subsegment_vote(std::vector<L>{}), std::invalid_argument);
}

TEST(SubsegmentVote, MatchesBruteForceAndIsPermutationInvariant) {
    SeededRng rng(201);
    for (int c = 0; c < 500; ++c) {
        std::vector<L> labels(1 + rng.index(20));
        const std::size_t alphabet = 1 + rng.index(kEmotionCount);
        for (auto& l : labels) l = emotion_from_index(rng.index(alphabet));
        const L want = oracle_vote(labels);
        EXPECT_EQ(subsegment_vote(labels), want);
        for (int s = 0; s < 3; ++s) {
            for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.index(i)]);
            EXPECT_EQ(subsegment_vote(labels), want);
        }
    }
}

TEST(BuildTimeline, ConstantClassifierThirtyTwoFrames) {
    FunctionClassifier sad([](const AudioWindow&) { return one_hot(L::sad); });
    const auto tl = build_timeline(silent_audio(32), sad);
    ASSERT_EQ(tl.subsegments.size(), 2u);
    EXPECT_EQ(tl.subsegments[0], (Subsegment{0, 16, L::sad}));
    EXPECT_EQ(tl.subsegments[1], (Subsegment{16, 32, L::sad}));
}

TEST(BuildTimeline, ThirtyThreeFramesSplitSixteenSixteenOne) {
    FunctionClassifier neutral([](const AudioWindow&) { return one_hot(L::neutral); });
    const auto tl = build_timeline(silent_audio(33), neutral);
    ASSERT_EQ(tl.subsegments.size(), 3u);
    EXPECT_EQ(tl.subsegments[0].end_frame - tl.subsegments[0].start_frame, 16u);
    EXPECT_EQ(tl.subsegments[1].end_frame - tl.subsegments[1].start_frame, 16u);
    EXPECT_EQ(tl.subsegments[2].end_frame - tl.subsegments[2].start_frame, 1u);
    EXPECT_NO_THROW(tl.validate());
}

TEST(BuildTimeline, SwitchAtFrameSixteen) {
    // At 1 fps a 1 s window holds only its centre frame.
    FunctionClassifier switcher([](const AudioWindow& w) { return w.begin < 16 ? one_hot(L::happy) : one_hot(L::sad); });
    const auto tl = build_timeline(silent_audio(32, 1.0), switcher, 16, 1.0);
    ASSERT_EQ(tl.subsegments.size(), 2u);
    EXPECT_EQ(tl.subsegments[0].label, L::happy);
    EXPECT_EQ(tl.subsegments[1].label, L::sad);
    EXPECT_EQ(tl.per_frame_labels[15], L::happy);
    EXPECT_EQ(tl.per_frame_labels[16], L::sad);
}

TEST(Timeline, PartitionPropertyOverRandomShapes) {
    SeededRng rng(211);
    for (int c = 0; c < 300; ++c) {
        std::vector<L> labels(1 + rng.index(200));
        for (auto& l : labels) l = emotion_from_index(rng.index(kEmotionCount));
        const std::size_t seg = 1 + rng.index(40);
        const auto tl = timeline_from_labels(labels, 25.0, seg);
        EXPECT_NO_THROW(tl.validate());
        std::size_t cursor = 0;
        for (const auto& s : tl.subsegments) {
            EXPECT_EQ(s.start_frame, cursor);
            EXPECT_GT(s.end_frame, s.start_frame);
            EXPECT_LE(s.end_frame - s.start_frame, seg);
            EXPECT_EQ(s.label, oracle_vote({labels.begin() + static_cast<std::ptrdiff_t>(s.start_frame),
                                            labels.begin() + static_cast<std::ptrdiff_t>(s.end_frame)}));
            for (std::size_t f = s.start_frame; f < s.end_frame; ++f) EXPECT_EQ(tl.label_at(f), s.label);
            cursor = s.end_frame;
        }
        EXPECT_EQ(cursor, labels.size());
    }
}

TEST(Timeline, ValidateDetectsBrokenPartition) {
    auto tl = timeline_from_labels(std::vector<L>(20, L::angry), 30.0, 8);
    tl.subsegments[1].start_frame += 1;
    EXPECT_THROW(tl.validate(), std::invalid_argument);
    auto bad_label = timeline_from_labels(std::vector<L>(20, L::angry), 30.0, 8);
    bad_label.subsegments[0].label = L::sad;
    EXPECT_THROW(bad_label.validate(), std::invalid_argument);
}

TEST(Timeline, JsonRoundTrip) {
    const auto tl = timeline_from_labels({L::happy, L::sad, L::sad, L::others, L::angry}, 24.0, 2);
    const auto back = timeline_from_json(timeline_to_json(tl));
    EXPECT_EQ(back.per_frame_labels, tl.per_frame_labels);
    EXPECT_EQ(back.subsegments, tl.subsegments);
    EXPECT_EQ(back.frame_rate, 24.0);
}

TEST(ProbabilityRows, ParsesCsv) {
    std::istringstream in("0,0,0,1,0,0,0,0\n# comment\n0.5,0,0,0,0,0.5,0,0\n");
    const auto rows = read_probability_rows(in);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(argmax_label(rows[0]), L::happy);
    EXPECT_EQ(argmax_label(rows[1]), L::angry);
}

TEST(ProbabilityRows, RejectsWrongColumnCount) {
    std::istringstream in("0.5,0.5\n");
    EXPECT_THROW(read_probability_rows(in), std::invalid_argument);
}

TEST(MergeLabel, Examples) {
    const auto table = LabelMergeTable::builtin();
    EXPECT_EQ(merge_label("ASVP-ESD", "pleasure", table), L::happy);
    EXPECT_EQ(merge_label("URDU", "angry", table), L::angry);
    EXPECT_EQ(merge_label("any", "boredom-like-unmapped", table), L::others);
    EXPECT_EQ(merge_label("ASVP-ESD", "boredom", table), L::others);
}

TEST(MergeLabel, BuiltinTableTotalOverDeclaredLabels) {
    const auto table = LabelMergeTable::builtin();
    for (const auto& [key, target] : table.entries()) {
        EXPECT_TRUE(table.declares(key.first));
        EXPECT_EQ(merge_label(key.first, key.second, table), target);
    }
    std::istringstream text(table.to_text());
    const auto reparsed = LabelMergeTable::parse(text);
    EXPECT_EQ(reparsed.entries(), table.entries());
}

TEST(MergeLabel, ParseRejectsConflicts) {
    std::istringstream in("D,joy,happy\nD,joy,sad\n");
    EXPECT_THROW(LabelMergeTable::parse(in), std::invalid_argument);
    std::istringstream unknown("D,joy,ecstatic\n");
    EXPECT_THROW(LabelMergeTable::parse(unknown), std::invalid_argument);
}

CorpusIndex corpus(const std::string& id, const std::vector<L>& emotions) {
    CorpusIndex index;
    for (std::size_t i = 0; i < emotions.size(); ++i)
        index.add({id, emotions[i], id + "-clip" + std::to_string(i), id + "-ref" + std::to_string(i)});
    return index;
}

TEST(DecoupledReference, SingleCandidate) {
    const auto index = corpus("p1", {L::neutral, L::happy});
    SeededRng rng(1);
    const auto r = sample_decoupled_reference(index, "p1", L::happy, rng);
    EXPECT_EQ(r.reference_frame_id, "p1-ref0");
    EXPECT_EQ(r.emotion, L::neutral);
    EXPECT_FALSE(r.fallback);
}

TEST(DecoupledReference, FallbackWhenOnlySameEmotion) {
    const auto index = corpus("p1", {L::happy, L::happy});
    SeededRng rng(1);
    const auto r = sample_decoupled_reference(index, "p1", L::happy, rng);
    EXPECT_TRUE(r.fallback);
    EXPECT_EQ(r.emotion, L::happy);
}

TEST(DecoupledReference, UnknownIdentityThrows) {
    const auto index = corpus("p1", {L::happy});
    SeededRng rng(1);
    EXPECT_THROW(sample_decoupled_reference(index, "p2", L::happy, rng), std::invalid_argument);
}

TEST(DecoupledReference, UniformOverCandidates) {
    auto index = corpus("p1", {L::angry, L::sad, L::neutral, L::happy});
    index.add({"p2", L::sad, "x", "p2-ref"});
    SeededRng rng(223);
    std::map<std::string, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto r = sample_decoupled_reference(index, "p1", L::happy, rng);
        ASSERT_NE(r.emotion, L::happy);
        ASSERT_FALSE(r.fallback);
        ++counts[r.reference_frame_id];
    }
    ASSERT_EQ(counts.size(), 3u);
    for (const auto& [id, c] : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 3.0, 0.02) << id;
}

TEST(DecoupledReference, NeverSameEmotionWithoutFallback) {
    SeededRng rng(227);
    for (int c = 0; c < 300; ++c) {
        std::vector<L> emotions(1 + rng.index(6));
        for (auto& e : emotions) e = emotion_from_index(rng.index(3));
        const auto index = corpus("id", emotions);
        const L clip = emotion_from_index(rng.index(3));
        const auto r = sample_decoupled_reference(index, "id", clip, rng);
        const bool any_other = std::any_of(emotions.begin(), emotions.end(), [&](L e) { return e != clip; });
        EXPECT_EQ(r.fallback, !any_other);
        if (!r.fallback) EXPECT_NE(r.emotion, clip);
    }
}

TEST(SyntheticClassifier, DeterministicAndValid) {
    const auto audio = silent_audio(40);
    SyntheticClassifier a(9, 0.5), b(9, 0.5);
    for (std::size_t f = 0; f < 40; ++f) {
        const auto pa = a.classify(AudioWindow{&audio, 0, f + 1});
        EXPECT_EQ(pa, b.classify(AudioWindow{&audio, 0, f + 1}));
        EXPECT_NO_THROW(validate_probabilities(pa));
    }
}

}  // namespace
}  // namespace memo
