// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Clip curation: trim -> face -> image quality -> lip sync -> manual review.
// Every threshold is strict (a score equal to the threshold is rejected) and
// each rejected record is attributed to the first stage it fails.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace memo {

enum class RejectionReason {
    malformed,
    zero_duration,
    no_face,
    multiple_heads,
    partial_face,
    low_quality,
    lip_sync,
    manual,
};

inline constexpr std::array<RejectionReason, 8> kAllRejectionReasons = {
    RejectionReason::malformed,    RejectionReason::zero_duration, RejectionReason::no_face,
    RejectionReason::multiple_heads, RejectionReason::partial_face, RejectionReason::low_quality,
    RejectionReason::lip_sync,     RejectionReason::manual,
};

std::string_view to_string(RejectionReason r) noexcept;
RejectionReason parse_rejection_reason(std::string_view name);

/// Normalized (x, y, w, h).
using BoundingBox = std::array<double, 4>;

struct ClipRecord {
    std::string clip_id;
    double duration_s = 0.0;
    std::optional<std::size_t> face_count;
    std::optional<bool> face_partial;
    std::optional<BoundingBox> bbox;
    std::optional<double> iqa_score;
    std::optional<double> sync_c;
    std::optional<bool> manual_ok;
    std::optional<RejectionReason> rejection_reason;
    /// bbox scaled for cropping; written by the face stage.
    std::optional<BoundingBox> crop_bbox;
    /// Unknown manifest fields, written back verbatim.
    nlohmann::ordered_json extras = nlohmann::ordered_json::object();
    /// Set when the manifest line could not be parsed into a record.
    std::string parse_error;
};

struct Thresholds {
    double max_clip_s = 30.0;
    double iqa_min = 40.0;
    double sync_c_min = 5.0;
    double bbox_scale = 1.1;
    std::size_t min_faces = 1;
    std::size_t max_faces = 1;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

/// Pluggable model backends. Unset scorers leave the manifest's values in place.
struct Scorers {
    /// Piece durations for one clip; must each be < max_clip_s and sum to the clip duration.
    std::function<std::vector<double>(const ClipRecord&, double max_clip_s)> scene_splitter;
    std::function<void(ClipRecord&)> face_detector;
    std::function<void(ClipRecord&)> iqa_scorer;
    std::function<void(ClipRecord&)> sync_scorer;

    /// Deterministic per clip_id pseudo-random scores, for tests and demos.
    static Scorers synthetic(std::uint64_t seed);
};

/// Even split into floor(d / max) + 1 pieces, each strictly shorter than max.
std::vector<double> even_split(double duration_s, double max_clip_s);

/// Splits long clips. Pieces get ids "<clip_id>#<k>" and inherit all other
/// fields; a clip that needs no split is returned unchanged. A zero-duration
/// clip comes back as a single rejected record.
std::vector<ClipRecord> scene_trim(const ClipRecord& record, const Scorers& scorers, double max_clip_s);

/// Center scaling, clamped to [0, 1].
BoundingBox scale_bbox(const BoundingBox& b, double scale);

struct GateResult {
    bool keep = true;
    std::optional<RejectionReason> reason;
    std::optional<BoundingBox> crop_bbox;
};

GateResult face_gate(const ClipRecord& record, const Thresholds& thresholds);
GateResult iqa_gate(const ClipRecord& record, const Thresholds& thresholds);
GateResult sync_gate(const ClipRecord& record, const Thresholds& thresholds);
GateResult manual_gate(const ClipRecord& record);

/// Face, quality, sync and manual stages on an already-trimmed record.
ClipRecord filter_record(ClipRecord record, const Thresholds& thresholds);

struct PipelineReport {
    std::size_t input_count = 0;
    std::size_t kept = 0;
    std::map<RejectionReason, std::size_t> rejected;
    Thresholds thresholds_used;

    nlohmann::ordered_json to_json() const;
};

struct PipelineResult {
    std::vector<ClipRecord> kept;      // sorted by clip_id
    std::vector<ClipRecord> rejected;  // sorted by clip_id, rejection_reason set
    PipelineReport report;
};

/// `threads` > 1 filters records concurrently; the result is identical.
PipelineResult run_pipeline(const std::vector<ClipRecord>& manifest, const Scorers& scorers,
                            const Thresholds& thresholds, std::size_t threads = 1);

/// Parses one manifest line. Never throws; failures set parse_error.
ClipRecord parse_record(std::string_view line, std::size_t line_number);
nlohmann::ordered_json record_to_json(const ClipRecord& record);

std::vector<ClipRecord> read_manifest(std::istream& in);
/// A mixed manifest exercising every stage: long clips, threshold-boundary
/// scores, manual overrides, missing fields and an unknown extra field.
std::vector<ClipRecord> synthetic_manifest(std::size_t n, std::uint64_t seed);
void write_manifest(std::ostream& out, const std::vector<ClipRecord>& records);

}  // namespace memo
