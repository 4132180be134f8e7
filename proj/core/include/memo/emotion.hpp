// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memo/numerics.hpp"

namespace memo {

/// The eight-way label space, in canonical order. The underlying value is
/// the canonical index and is what every tie rule compares.
enum class EmotionLabel : std::uint8_t {
    angry = 0,
    disgusted = 1,
    fearful = 2,
    happy = 3,
    neutral = 4,
    sad = 5,
    surprised = 6,
    others = 7,
};

inline constexpr std::size_t kEmotionCount = 8;

const std::array<EmotionLabel, kEmotionCount>& all_emotions() noexcept;
std::string_view to_string(EmotionLabel label) noexcept;
std::optional<EmotionLabel> parse_emotion(std::string_view name);
EmotionLabel emotion_from_index(std::size_t index);
constexpr std::size_t index_of(EmotionLabel label) noexcept { return static_cast<std::size_t>(label); }

using EmotionProbabilities = std::array<double, kEmotionCount>;

/// Throws if any entry is negative/non-finite or the sum is off by more than 1e-9.
void validate_probabilities(const EmotionProbabilities& p);
/// argmax with ties resolved toward the lowest canonical index.
EmotionLabel argmax_label(const EmotionProbabilities& p);

/// Per-video-frame audio features, one row per frame.
struct AudioTimeline {
    double frame_rate = 30.0;
    DenseMatrix features;

    std::size_t frames() const noexcept { return features.rows(); }
};

/// Contiguous run of audio frames [begin, end) handed to a classifier.
struct AudioWindow {
    const AudioTimeline* audio = nullptr;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t frames() const noexcept { return end - begin; }
    std::span<const double> values() const;
};

class FrameClassifier {
public:
    virtual ~FrameClassifier() = default;
    virtual EmotionProbabilities classify(const AudioWindow& window) const = 0;
};

/// Adapts any callable to the classifier interface.
class FunctionClassifier final : public FrameClassifier {
public:
    explicit FunctionClassifier(std::function<EmotionProbabilities(const AudioWindow&)> fn) : fn_(std::move(fn)) {}
    EmotionProbabilities classify(const AudioWindow& window) const override { return fn_(window); }

private:
    std::function<EmotionProbabilities(const AudioWindow&)> fn_;
};

/// Deterministic stand-in: hashes the window contents into logits and
/// returns their softmax. Same window bytes, same answer.
class SyntheticClassifier final : public FrameClassifier {
public:
    explicit SyntheticClassifier(std::uint64_t seed = 0, double temperature = 1.0)
        : seed_(seed), temperature_(temperature) {}
    EmotionProbabilities classify(const AudioWindow& window) const override;

private:
    std::uint64_t seed_;
    double temperature_;
};

inline constexpr double kDefaultWindowSeconds = 3.0;
inline constexpr std::size_t kDefaultSubsegmentFrames = 16;

/// Frame range [begin, end) of the window centred on `frame_index`, clamped
/// to the timeline instead of padded.
std::pair<std::size_t, std::size_t> emotion_window(std::size_t n_frames, double frame_rate, std::size_t frame_index,
                                                   double window_seconds = kDefaultWindowSeconds);

EmotionLabel frame_emotion(const AudioTimeline& audio, std::size_t frame_index, const FrameClassifier& classifier,
                           double window_seconds = kDefaultWindowSeconds);

/// Modal label; ties go to the lowest canonical index.
EmotionLabel subsegment_vote(std::span<const EmotionLabel> per_frame);

struct Subsegment {
    std::size_t start_frame = 0;
    std::size_t end_frame = 0;  // exclusive
    EmotionLabel label = EmotionLabel::neutral;

    bool operator==(const Subsegment&) const = default;
};

struct EmotionTimeline {
    double frame_rate = 30.0;
    std::vector<EmotionLabel> per_frame_labels;
    std::vector<Subsegment> subsegments;

    /// Throws if subsegments do not partition the frames or a label disagrees with its vote.
    void validate() const;
    /// Label of the subsegment containing `frame`.
    EmotionLabel label_at(std::size_t frame) const;
};

/// Groups already-classified frames into fixed-length subsegments (last may be shorter).
EmotionTimeline timeline_from_labels(std::vector<EmotionLabel> per_frame, double frame_rate,
                                     std::size_t subsegment_frames = kDefaultSubsegmentFrames);

EmotionTimeline build_timeline(const AudioTimeline& audio, const FrameClassifier& classifier,
                               std::size_t subsegment_frames = kDefaultSubsegmentFrames,
                               double window_seconds = kDefaultWindowSeconds);

std::string timeline_to_json(const EmotionTimeline& timeline);
EmotionTimeline timeline_from_json(std::string_view text);

/// Reads an externally computed probability file: one row per frame, eight
/// comma-separated columns in canonical label order. Blank lines and lines
/// starting with '#' are skipped.
std::vector<EmotionProbabilities> read_probability_rows(std::istream& in);

class LabelMergeTable {
public:
    /// Dataset names of the shipped table with identity mappings for the
    /// canonical labels, plus ASVP-ESD pleasure -> happy.
    static LabelMergeTable builtin();

    /// Text table, one `dataset,source_label,target_label` row per line.
    /// '#' starts a comment. Rejects unknown targets and conflicting rows.
    static LabelMergeTable parse(std::istream& in);

    void add(const std::string& dataset, const std::string& source, EmotionLabel target);

    /// Unknown source labels map to `others`. An undeclared dataset is
    /// treated as having only the canonical identity mappings.
    EmotionLabel merge(std::string_view dataset, std::string_view source) const;

    bool declares(std::string_view dataset) const;
    const std::set<std::string, std::less<>>& datasets() const noexcept { return datasets_; }
    const std::map<std::pair<std::string, std::string>, EmotionLabel>& entries() const noexcept { return entries_; }

    std::string to_text() const;

private:
    std::set<std::string, std::less<>> datasets_;
    std::map<std::pair<std::string, std::string>, EmotionLabel> entries_;
};

EmotionLabel merge_label(std::string_view dataset, std::string_view source, const LabelMergeTable& table);

/// Speaker/emotion catalogue used to pick reference frames.
class CorpusIndex {
public:
    struct Record {
        std::string identity;
        EmotionLabel emotion = EmotionLabel::neutral;
        std::string clip_id;
        std::string reference_frame_id;
    };

    void add(Record record);
    bool contains(std::string_view identity) const;
    /// All records of `identity`, in insertion order.
    std::vector<const Record*> records_for(std::string_view identity) const;
    std::vector<const Record*> lookup(std::string_view identity, EmotionLabel emotion) const;
    std::size_t size() const noexcept { return records_.size(); }

private:
    std::vector<Record> records_;
};

struct DecoupledReference {
    std::string reference_frame_id;
    EmotionLabel emotion = EmotionLabel::neutral;
    /// Set when the identity had no frame with a different emotion.
    bool fallback = false;
};

/// Picks a reference frame of the same identity whose emotion differs from
/// `clip_emotion`, uniformly among candidates.
DecoupledReference sample_decoupled_reference(const CorpusIndex& index, std::string_view identity,
                                              EmotionLabel clip_emotion, SeededRng& rng);

}  // namespace memo
