// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include "memo/emotion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace memo {

namespace {

constexpr std::array<std::string_view, kEmotionCount> kNames = {
    "angry", "disgusted", "fearful", "happy", "neutral", "sad", "surprised", "others",
};

// Dataset names of the speech and music emotion corpora the label space was built from.
constexpr std::array<std::string_view, 25> kBuiltinDatasets = {
    "AESDD",   "ASED",     "ASVP-ESD", "CaFE",     "EMNS",         "EmoDB", "EmoV-DB",
    "Emozionalmente",      "eNTERFACE", "ESD",     "JL-Corpus",    "M3ED",  "MEAD",
    "MESD",    "Oreau",    "PAVOQUE",  "Polish",   "RAVDESS",      "SAVEE", "SUBESCO",
    "TESS",    "TurEV-DB", "URDU",     "RAVDESS-Song", "MTG-Jamendo",
};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string normalize_label(std::string_view s) {
    std::string out = trim(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

const std::array<EmotionLabel, kEmotionCount>& all_emotions() noexcept {
    static constexpr std::array<EmotionLabel, kEmotionCount> labels = {
        EmotionLabel::angry,   EmotionLabel::disgusted, EmotionLabel::fearful,   EmotionLabel::happy,
        EmotionLabel::neutral, EmotionLabel::sad,       EmotionLabel::surprised, EmotionLabel::others,
    };
    return labels;
}

std::string_view to_string(EmotionLabel label) noexcept { return kNames[index_of(label)]; }

std::optional<EmotionLabel> parse_emotion(std::string_view name) {
    const std::string n = normalize_label(name);
    for (std::size_t i = 0; i < kEmotionCount; ++i)
        if (kNames[i] == n) return static_cast<EmotionLabel>(i);
    return std::nullopt;
}

EmotionLabel emotion_from_index(std::size_t index) {
    if (index >= kEmotionCount) throw std::out_of_range("emotion index " + std::to_string(index));
    return static_cast<EmotionLabel>(index);
}

void validate_probabilities(const EmotionProbabilities& p) {
    double sum = 0.0;
    for (double x : p) {
        if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument("classifier returned a negative or non-finite probability");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("classifier probabilities sum to " + std::to_string(sum));
}

EmotionLabel argmax_label(const EmotionProbabilities& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kEmotionCount; ++i)
        if (p[i] > p[best]) best = i;
    return static_cast<EmotionLabel>(best);
}

std::span<const double> AudioWindow::values() const {
    const std::size_t dim = audio->features.cols();
    return {audio->features.data().data() + begin * dim, (end - begin) * dim};
}

EmotionProbabilities SyntheticClassifier::classify(const AudioWindow& window) const {
    const auto values = window.values();
    const std::string_view bytes(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    const std::uint64_t h = hash_bytes(bytes) ^ mix64(seed_);
    Vector logits(kEmotionCount);
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        const std::uint64_t r = mix64(h + i);
        logits[i] = (static_cast<double>(r >> 11) * 0x1.0p-53 * 4.0 - 2.0) / temperature_;
    }
    const Vector p = softmax(logits);
    EmotionProbabilities out{};
    std::copy(p.begin(), p.end(), out.begin());
    return out;
}

std::pair<std::size_t, std::size_t> emotion_window(std::size_t n_frames, double frame_rate, std::size_t frame_index,
                                                   double window_seconds) {
    if (n_frames == 0) throw std::invalid_argument("emotion_window: empty timeline");
    if (!(window_seconds > 0.0)) throw std::invalid_argument("emotion_window: window_seconds must be > 0");
    if (!(frame_rate > 0.0)) throw std::invalid_argument("emotion_window: frame_rate must be > 0");
    if (frame_index >= n_frames) throw std::out_of_range("emotion_window: frame outside timeline");
    // Frames whose timestamps lie within half a window of the centre frame.
    const auto half = static_cast<std::size_t>(std::floor(0.5 * window_seconds * frame_rate + 1e-9));
    const std::size_t begin = frame_index > half ? frame_index - half : 0;
    const std::size_t end = std::min(n_frames, frame_index + half + 1);
    return {begin, end};
}

EmotionLabel frame_emotion(const AudioTimeline& audio, std::size_t frame_index, const FrameClassifier& classifier,
                           double window_seconds) {
    const auto [begin, end] = emotion_window(audio.frames(), audio.frame_rate, frame_index, window_seconds);
    const auto probs = classifier.classify(AudioWindow{&audio, begin, end});
    validate_probabilities(probs);
    return argmax_label(probs);
}

EmotionLabel subsegment_vote(std::span<const EmotionLabel> per_frame) {
    if (per_frame.empty()) throw std::invalid_argument("subsegment_vote: empty subsegment");
    std::array<std::size_t, kEmotionCount> counts{};
    for (auto l : per_frame) ++counts[index_of(l)];
    std::size_t best = 0;
    for (std::size_t i = 1; i < kEmotionCount; ++i)
        if (counts[i] > counts[best]) best = i;
    return static_cast<EmotionLabel>(best);
}

void EmotionTimeline::validate() const {
    std::size_t expected = 0;
    for (const auto& s : subsegments) {
        if (s.start_frame != expected || s.end_frame <= s.start_frame || s.end_frame > per_frame_labels.size()) {
            throw std::invalid_argument("EmotionTimeline: subsegments do not partition the frame range");
        }
        const std::span<const EmotionLabel> labels(per_frame_labels.data() + s.start_frame, s.end_frame - s.start_frame);
        if (subsegment_vote(labels) != s.label) {
            throw std::invalid_argument("EmotionTimeline: subsegment label disagrees with its majority vote");
        }
        expected = s.end_frame;
    }
    if (expected != per_frame_labels.size()) throw std::invalid_argument("EmotionTimeline: frames not covered");
}

EmotionLabel EmotionTimeline::label_at(std::size_t frame) const {
    for (const auto& s : subsegments)
        if (frame >= s.start_frame && frame < s.end_frame) return s.label;
    throw std::out_of_range("EmotionTimeline: frame " + std::to_string(frame) + " outside timeline");
}

EmotionTimeline timeline_from_labels(std::vector<EmotionLabel> per_frame, double frame_rate,
                                     std::size_t subsegment_frames) {
    if (subsegment_frames == 0) throw std::invalid_argument("subsegment length must be >= 1");
    EmotionTimeline t;
    t.frame_rate = frame_rate;
    t.per_frame_labels = std::move(per_frame);
    const std::size_t n = t.per_frame_labels.size();
    for (std::size_t start = 0; start < n; start += subsegment_frames) {
        const std::size_t end = std::min(n, start + subsegment_frames);
        const std::span<const EmotionLabel> labels(t.per_frame_labels.data() + start, end - start);
        t.subsegments.push_back({start, end, subsegment_vote(labels)});
    }
    return t;
}

EmotionTimeline build_timeline(const AudioTimeline& audio, const FrameClassifier& classifier,
                               std::size_t subsegment_frames, double window_seconds) {
    if (audio.frames() == 0) throw std::invalid_argument("build_timeline: empty audio timeline");
    std::vector<EmotionLabel> labels(audio.frames());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = frame_emotion(audio, i, classifier, window_seconds);
    return timeline_from_labels(std::move(labels), audio.frame_rate, subsegment_frames);
}

std::string timeline_to_json(const EmotionTimeline& timeline) {
    nlohmann::json j;
    j["frame_rate"] = timeline.frame_rate;
    auto& labels = j["per_frame_labels"] = nlohmann::json::array();
    for (auto l : timeline.per_frame_labels) labels.push_back(to_string(l));
    auto& subs = j["subsegments"] = nlohmann::json::array();
    for (const auto& s : timeline.subsegments)
        subs.push_back({{"start_frame", s.start_frame}, {"end_frame", s.end_frame}, {"label", to_string(s.label)}});
    return j.dump();
}

EmotionTimeline timeline_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    auto label = [](const nlohmann::json& v) {
        const auto name = v.get<std::string>();
        auto l = parse_emotion(name);
        if (!l) throw std::invalid_argument("timeline_from_json: unknown emotion '" + name + "'");
        return *l;
    };
    EmotionTimeline t;
    t.frame_rate = j.at("frame_rate").get<double>();
    for (const auto& v : j.at("per_frame_labels")) t.per_frame_labels.push_back(label(v));
    for (const auto& s : j.at("subsegments"))
        t.subsegments.push_back({s.at("start_frame").get<std::size_t>(), s.at("end_frame").get<std::size_t>(),
                                 label(s.at("label"))});
    t.validate();
    return t;
}

std::vector<EmotionProbabilities> read_probability_rows(std::istream& in) {
    std::vector<EmotionProbabilities> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split(t, ',');
        if (fields.size() != kEmotionCount) {
            throw std::invalid_argument("probability file line " + std::to_string(line_no) + ": expected 8 columns, got " +
                                        std::to_string(fields.size()));
        }
        EmotionProbabilities p{};
        for (std::size_t i = 0; i < kEmotionCount; ++i) {
            try {
                std::size_t used = 0;
                p[i] = std::stod(fields[i], &used);
                if (used != fields[i].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw std::invalid_argument("probability file line " + std::to_string(line_no) + ": bad number '" +
                                            fields[i] + "'");
            }
        }
        try {
            validate_probabilities(p);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("probability file line " + std::to_string(line_no) + ": " + e.what());
        }
        rows.push_back(p);
    }
    return rows;
}

LabelMergeTable LabelMergeTable::builtin() {
    LabelMergeTable t;
    for (auto ds : kBuiltinDatasets) {
        for (auto l : all_emotions()) t.add(std::string(ds), std::string(to_string(l)), l);
    }
    t.add("ASVP-ESD", "pleasure", EmotionLabel::happy);
    return t;
}

LabelMergeTable LabelMergeTable::parse(std::istream& in) {
    LabelMergeTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        const auto where = "merge table line " + std::to_string(line_no) + ": ";
        if (fields.size() != 3) throw std::invalid_argument(where + "expected dataset,source_label,target_label");
        if (fields[0].empty() || fields[1].empty()) throw std::invalid_argument(where + "empty dataset or source label");
        auto target = parse_emotion(fields[2]);
        if (!target) throw std::invalid_argument(where + "unknown target label '" + fields[2] + "'");
        const auto key = std::make_pair(fields[0], normalize_label(fields[1]));
        if (auto it = t.entries_.find(key); it != t.entries_.end() && it->second != *target) {
            throw std::invalid_argument(where + "conflicting mapping for " + fields[0] + "/" + fields[1]);
        }
        t.add(fields[0], fields[1], *target);
    }
    return t;
}

void LabelMergeTable::add(const std::string& dataset, const std::string& source, EmotionLabel target) {
    datasets_.insert(dataset);
    entries_[{dataset, normalize_label(source)}] = target;
}

EmotionLabel LabelMergeTable::merge(std::string_view dataset, std::string_view source) const {
    const std::string label = normalize_label(source);
    if (auto it = entries_.find({std::string(dataset), label}); it != entries_.end()) return it->second;
    if (!declares(dataset)) {
        if (auto canonical = parse_emotion(label)) return *canonical;
    }
    return EmotionLabel::others;
}

bool LabelMergeTable::declares(std::string_view dataset) const { return datasets_.find(dataset) != datasets_.end(); }

std::string LabelMergeTable::to_text() const {
    std::ostringstream out;
    out << "# dataset,source_label,target_label\n";
    for (const auto& [key, target] : entries_) out << key.first << ',' << key.second << ',' << to_string(target) << '\n';
    return out.str();
}

EmotionLabel merge_label(std::string_view dataset, std::string_view source, const LabelMergeTable& table) {
    return table.merge(dataset, source);
}

void CorpusIndex::add(Record record) { records_.push_back(std::move(record)); }

bool CorpusIndex::contains(std::string_view identity) const {
    return std::any_of(records_.begin(), records_.end(), [&](const Record& r) { return r.identity == identity; });
}

std::vector<const CorpusIndex::Record*> CorpusIndex::records_for(std::string_view identity) const {
    std::vector<const Record*> out;
    for (const auto& r : records_)
        if (r.identity == identity) out.push_back(&r);
    return out;
}

std::vector<const CorpusIndex::Record*> CorpusIndex::lookup(std::string_view identity, EmotionLabel emotion) const {
    std::vector<const Record*> out;
    for (const auto& r : records_)
        if (r.identity == identity && r.emotion == emotion) out.push_back(&r);
    return out;
}

DecoupledReference sample_decoupled_reference(const CorpusIndex& index, std::string_view identity,
                                              EmotionLabel clip_emotion, SeededRng& rng) {
    const auto all = index.records_for(identity);
    if (all.empty()) throw std::invalid_argument("sample_decoupled_reference: unknown identity '" + std::string(identity) + "'");
    std::vector<const CorpusIndex::Record*> candidates;
    for (const auto* r : all)
        if (r->emotion != clip_emotion) candidates.push_back(r);
    const bool fallback = candidates.empty();
    const auto& pool = fallback ? all : candidates;
    const auto* pick = pool[rng.index(pool.size())];
    return {pick->reference_frame_id, pick->emotion, fallback};
}

}  // namespace memo
