// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "memo/numerics.hpp"

namespace memo {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<std::string_view, 10> kKnownFields = {
    "clip_id", "duration_s", "face_count", "face_partial", "bbox",
    "iqa_score", "sync_c", "manual_ok", "rejection_reason", "crop_bbox",
};

bool is_known(const std::string& key) {
    return std::find(kKnownFields.begin(), kKnownFields.end(), key) != kKnownFields.end();
}

BoundingBox parse_bbox(const ojson& j, const char* name) {
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument(std::string(name) + " must be [x, y, w, h]");
    BoundingBox b{};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!j[i].is_number()) throw std::invalid_argument(std::string(name) + " entries must be numbers");
        b[i] = j[i].get<double>();
    }
    return b;
}

double number_field(const ojson& j, const char* name) {
    if (!j.is_number()) throw std::invalid_argument(std::string(name) + " must be a number");
    return j.get<double>();
}

bool bool_field(const ojson& j, const char* name) {
    if (!j.is_boolean()) throw std::invalid_argument(std::string(name) + " must be a boolean");
    return j.get<bool>();
}

bool well_formed(const ClipRecord& r) {
    if (!r.parse_error.empty() || r.clip_id.empty()) return false;
    if (!std::isfinite(r.duration_s) || r.duration_s < 0.0) return false;
    if (!r.face_count || !r.face_partial || !r.bbox || !r.iqa_score || !r.sync_c) return false;
    for (double x : *r.bbox)
        if (!std::isfinite(x)) return false;
    if ((*r.bbox)[2] < 0.0 || (*r.bbox)[3] < 0.0) return false;
    return std::isfinite(*r.iqa_score) && std::isfinite(*r.sync_c);
}

GateResult reject(RejectionReason r) { return GateResult{false, r, std::nullopt}; }

}  // namespace

std::string_view to_string(RejectionReason r) noexcept {
    switch (r) {
        case RejectionReason::malformed: return "malformed";
        case RejectionReason::zero_duration: return "zero_duration";
        case RejectionReason::no_face: return "no_face";
        case RejectionReason::multiple_heads: return "multiple_heads";
        case RejectionReason::partial_face: return "partial_face";
        case RejectionReason::low_quality: return "low_quality";
        case RejectionReason::lip_sync: return "lip_sync";
        case RejectionReason::manual: return "manual";
    }
    return "?";
}

RejectionReason parse_rejection_reason(std::string_view name) {
    for (auto r : kAllRejectionReasons)
        if (to_string(r) == name) return r;
    throw std::invalid_argument("unknown rejection reason '" + std::string(name) + "'");
}

void Thresholds::validate() const {
    if (!(max_clip_s > 0.0) || !std::isfinite(max_clip_s)) throw std::invalid_argument("thresholds: max_clip_s must be > 0");
    if (!(iqa_min > 0.0) || !std::isfinite(iqa_min)) throw std::invalid_argument("thresholds: iqa_min must be > 0");
    if (!(sync_c_min > 0.0) || !std::isfinite(sync_c_min)) throw std::invalid_argument("thresholds: sync_c_min must be > 0");
    if (!(bbox_scale >= 1.0) || !std::isfinite(bbox_scale)) throw std::invalid_argument("thresholds: bbox_scale must be >= 1");
    if (min_faces == 0 || min_faces > max_faces) throw std::invalid_argument("thresholds: need 1 <= min_faces <= max_faces");
}

nlohmann::ordered_json Thresholds::to_json() const {
    ojson j;
    j["max_clip_s"] = max_clip_s;
    j["iqa_min"] = iqa_min;
    j["sync_c_min"] = sync_c_min;
    j["bbox_scale"] = bbox_scale;
    j["min_faces"] = min_faces;
    j["max_faces"] = max_faces;
    return j;
}

Scorers Scorers::synthetic(std::uint64_t seed) {
    auto rng_for = [seed](const ClipRecord& r, std::uint64_t stream) {
        return SeededRng(mix64(seed ^ hash_bytes(r.clip_id))).derive(stream);
    };
    Scorers s;
    s.scene_splitter = [](const ClipRecord& r, double max_clip_s) { return even_split(r.duration_s, max_clip_s); };
    s.face_detector = [rng_for](ClipRecord& r) {
        SeededRng rng = rng_for(r, 1);
        const double u = rng.uniform();
        r.face_count = u < 0.08 ? 0 : (u < 0.16 ? 2 : 1);
        r.face_partial = rng.uniform() < 0.08;
        const double w = rng.uniform(0.1, 0.5);
        const double h = rng.uniform(0.1, 0.5);
        r.bbox = BoundingBox{rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h), w, h};
    };
    s.iqa_scorer = [rng_for](ClipRecord& r) { r.iqa_score = rng_for(r, 2).uniform(20.0, 80.0); };
    s.sync_scorer = [rng_for](ClipRecord& r) { r.sync_c = rng_for(r, 3).uniform(0.0, 10.0); };
    return s;
}

std::vector<double> even_split(double duration_s, double max_clip_s) {
    if (!(duration_s > 0.0)) return {duration_s};
    if (duration_s < max_clip_s) return {duration_s};
    const auto n = static_cast<std::size_t>(std::floor(duration_s / max_clip_s)) + 1;
    std::vector<double> pieces(n, duration_s / static_cast<double>(n));
    return pieces;
}

std::vector<ClipRecord> scene_trim(const ClipRecord& record, const Scorers& scorers, double max_clip_s) {
    if (!record.parse_error.empty() || !std::isfinite(record.duration_s) || record.duration_s < 0.0) {
        ClipRecord r = record;
        r.rejection_reason = RejectionReason::malformed;
        return {r};
    }
    if (record.duration_s == 0.0) {
        ClipRecord r = record;
        r.rejection_reason = RejectionReason::zero_duration;
        return {r};
    }
    if (record.duration_s < max_clip_s) return {record};

    const std::vector<double> pieces =
        scorers.scene_splitter ? scorers.scene_splitter(record, max_clip_s) : even_split(record.duration_s, max_clip_s);
    double total = 0.0;
    for (double p : pieces) {
        if (!(p > 0.0 && p < max_clip_s)) {
            throw std::invalid_argument("scene_trim: splitter produced a piece of " + std::to_string(p) + " s for '" +
                                        record.clip_id + "'");
        }
        total += p;
    }
    if (std::abs(total - record.duration_s) > 1e-6) {
        throw std::invalid_argument("scene_trim: splitter pieces for '" + record.clip_id + "' do not sum to the duration");
    }
    std::vector<ClipRecord> out;
    out.reserve(pieces.size());
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        ClipRecord r = record;
        r.clip_id = record.clip_id + "#" + std::to_string(k);
        r.duration_s = pieces[k];
        out.push_back(std::move(r));
    }
    return out;
}

BoundingBox scale_bbox(const BoundingBox& b, double scale) {
    const double cx = b[0] + 0.5 * b[2];
    const double cy = b[1] + 0.5 * b[3];
    const double w = b[2] * scale;
    const double h = b[3] * scale;
    const double x0 = std::clamp(cx - 0.5 * w, 0.0, 1.0);
    const double y0 = std::clamp(cy - 0.5 * h, 0.0, 1.0);
    const double x1 = std::clamp(cx + 0.5 * w, 0.0, 1.0);
    const double y1 = std::clamp(cy + 0.5 * h, 0.0, 1.0);
    return {x0, y0, x1 - x0, y1 - y0};
}

GateResult face_gate(const ClipRecord& record, const Thresholds& thresholds) {
    if (!record.face_count || !record.face_partial || !record.bbox) return reject(RejectionReason::malformed);
    if (*record.face_count < thresholds.min_faces) return reject(RejectionReason::no_face);
    if (*record.face_count > thresholds.max_faces) return reject(RejectionReason::multiple_heads);
    if (*record.face_partial) return reject(RejectionReason::partial_face);
    return GateResult{true, std::nullopt, scale_bbox(*record.bbox, thresholds.bbox_scale)};
}

GateResult iqa_gate(const ClipRecord& record, const Thresholds& thresholds) {
    if (!record.iqa_score) return reject(RejectionReason::malformed);
    if (!(*record.iqa_score > thresholds.iqa_min)) return reject(RejectionReason::low_quality);
    return {};
}

GateResult sync_gate(const ClipRecord& record, const Thresholds& thresholds) {
    if (!record.sync_c) return reject(RejectionReason::malformed);
    if (!(*record.sync_c > thresholds.sync_c_min)) return reject(RejectionReason::lip_sync);
    return {};
}

GateResult manual_gate(const ClipRecord& record) {
    if (record.manual_ok && !*record.manual_ok) return reject(RejectionReason::manual);
    return {};
}

ClipRecord filter_record(ClipRecord record, const Thresholds& thresholds) {
    if (record.rejection_reason) return record;
    if (!well_formed(record)) {
        record.rejection_reason = RejectionReason::malformed;
        return record;
    }
    const GateResult face = face_gate(record, thresholds);
    if (!face.keep) {
        record.rejection_reason = face.reason;
        return record;
    }
    record.crop_bbox = face.crop_bbox;
    for (const GateResult& g : {iqa_gate(record, thresholds), sync_gate(record, thresholds), manual_gate(record)}) {
        if (!g.keep) {
            record.rejection_reason = g.reason;
            record.crop_bbox.reset();
            return record;
        }
    }
    return record;
}

nlohmann::ordered_json PipelineReport::to_json() const {
    ojson j;
    j["input_count"] = input_count;
    j["kept"] = kept;
    ojson rej = ojson::object();
    for (auto r : kAllRejectionReasons) {
        const auto it = rejected.find(r);
        rej[std::string(to_string(r))] = it == rejected.end() ? 0 : it->second;
    }
    j["rejected"] = rej;
    j["thresholds_used"] = thresholds_used.to_json();
    return j;
}

PipelineResult run_pipeline(const std::vector<ClipRecord>& manifest, const Scorers& scorers,
                            const Thresholds& thresholds, std::size_t threads) {
    thresholds.validate();
    std::vector<ClipRecord> trimmed;
    for (const auto& input : manifest) {
        ClipRecord rec = input;
        rec.rejection_reason.reset();
        rec.crop_bbox.reset();
        for (auto& piece : scene_trim(rec, scorers, thresholds.max_clip_s)) trimmed.push_back(std::move(piece));
    }

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ClipRecord& r = trimmed[i];
            if (!r.rejection_reason) {
                if (scorers.face_detector) scorers.face_detector(r);
                if (scorers.iqa_scorer) scorers.iqa_scorer(r);
                if (scorers.sync_scorer) scorers.sync_scorer(r);
            }
            r = filter_record(std::move(r), thresholds);
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, trimmed.size()));
    if (n_threads == 1) {
        work(0, trimmed.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (trimmed.size() + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t) {
            const std::size_t b = std::min(trimmed.size(), t * chunk);
            const std::size_t e = std::min(trimmed.size(), b + chunk);
            pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    std::stable_sort(trimmed.begin(), trimmed.end(),
                     [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; });
    PipelineResult result;
    result.report.input_count = trimmed.size();
    result.report.thresholds_used = thresholds;
    for (auto r : kAllRejectionReasons) result.report.rejected[r] = 0;
    for (auto& r : trimmed) {
        if (r.rejection_reason) {
            ++result.report.rejected[*r.rejection_reason];
            result.rejected.push_back(std::move(r));
        } else {
            result.kept.push_back(std::move(r));
        }
    }
    result.report.kept = result.kept.size();
    return result;
}

ClipRecord parse_record(std::string_view line, std::size_t line_number) {
    ClipRecord r;
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const std::exception& e) {
        r.clip_id = "line-" + std::to_string(line_number);
        r.parse_error = std::string("invalid JSON: ") + e.what();
        return r;
    }
    try {
        if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
        if (j.contains("clip_id") && j["clip_id"].is_string()) r.clip_id = j["clip_id"].get<std::string>();
        if (r.clip_id.empty()) {
            r.clip_id = "line-" + std::to_string(line_number);
            throw std::invalid_argument("clip_id must be a non-empty string");
        }
        if (!j.contains("duration_s")) throw std::invalid_argument("duration_s is missing");
        r.duration_s = number_field(j["duration_s"], "duration_s");
        if (j.contains("face_count")) {
            const auto& f = j["face_count"];
            if (!f.is_number_integer() || f.get<long long>() < 0)
                throw std::invalid_argument("face_count must be a non-negative integer");
            r.face_count = f.get<std::size_t>();
        }
        if (j.contains("face_partial")) r.face_partial = bool_field(j["face_partial"], "face_partial");
        if (j.contains("bbox")) r.bbox = parse_bbox(j["bbox"], "bbox");
        if (j.contains("iqa_score")) r.iqa_score = number_field(j["iqa_score"], "iqa_score");
        if (j.contains("sync_c")) r.sync_c = number_field(j["sync_c"], "sync_c");
        if (j.contains("manual_ok") && !j["manual_ok"].is_null()) r.manual_ok = bool_field(j["manual_ok"], "manual_ok");
        if (j.contains("rejection_reason") && !j["rejection_reason"].is_null())
            r.rejection_reason = parse_rejection_reason(j["rejection_reason"].get<std::string>());
        if (j.contains("crop_bbox")) r.crop_bbox = parse_bbox(j["crop_bbox"], "crop_bbox");
    } catch (const std::exception& e) {
        r.parse_error = e.what();
    }
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!is_known(it.key())) r.extras[it.key()] = it.value();
    }
    return r;
}

nlohmann::ordered_json record_to_json(const ClipRecord& r) {
    ojson j;
    j["clip_id"] = r.clip_id;
    j["duration_s"] = r.duration_s;
    if (r.face_count) j["face_count"] = *r.face_count;
    if (r.face_partial) j["face_partial"] = *r.face_partial;
    if (r.bbox) j["bbox"] = *r.bbox;
    if (r.iqa_score) j["iqa_score"] = *r.iqa_score;
    if (r.sync_c) j["sync_c"] = *r.sync_c;
    if (r.manual_ok) j["manual_ok"] = *r.manual_ok;
    if (r.rejection_reason) j["rejection_reason"] = to_string(*r.rejection_reason);
    if (r.crop_bbox) j["crop_bbox"] = *r.crop_bbox;
    if (!r.parse_error.empty()) j["parse_error"] = r.parse_error;
    for (auto it = r.extras.begin(); it != r.extras.end(); ++it)
        if (!j.contains(it.key())) j[it.key()] = it.value();
    return j;
}

std::vector<ClipRecord> read_manifest(std::istream& in) {
    std::vector<ClipRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_record(line, n));
    }
    return out;
}

std::vector<ClipRecord> synthetic_manifest(std::size_t n, std::uint64_t seed) {
    static constexpr double kDurations[] = {29.0, 30.0, 31.0, 90.0, 0.0};
    static constexpr double kIqa[] = {39.0, 40.0, 41.0};
    static constexpr double kSync[] = {4.9, 5.0, 5.1};
    SeededRng rng(seed);
    std::vector<ClipRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        ClipRecord r;
        char id[32];
        std::snprintf(id, sizeof id, "clip-%04zu", i);
        r.clip_id = id;
        r.duration_s = rng.uniform() < 0.2 ? kDurations[rng.index(5)] : rng.uniform(1.0, 70.0);
        const double u = rng.uniform();
        r.face_count = u < 0.07 ? 0 : (u < 0.14 ? 2 : 1);
        r.face_partial = rng.uniform() < 0.07;
        const double w = rng.uniform(0.05, 0.6);
        const double h = rng.uniform(0.05, 0.6);
        r.bbox = BoundingBox{rng.uniform(-0.05, 1.0 - 0.5 * w), rng.uniform(-0.05, 1.0 - 0.5 * h), w, h};
        r.iqa_score = rng.uniform() < 0.15 ? kIqa[rng.index(3)] : rng.uniform(25.0, 75.0);
        r.sync_c = rng.uniform() < 0.15 ? kSync[rng.index(3)] : rng.uniform(1.0, 10.0);
        const double m = rng.uniform();
        if (m < 0.08) r.manual_ok = false;
        else if (m < 0.3) r.manual_ok = true;
        const double bad = rng.uniform();
        if (bad < 0.03) r.iqa_score.reset();
        else if (bad < 0.05) r.duration_s = -1.0;
        r.extras["source"] = "synthetic-" + std::to_string(rng.index(4));
        out.push_back(std::move(r));
    }
    return out;
}

void write_manifest(std::ostream& out, const std::vector<ClipRecord>& records) {
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

}  // namespace memo
