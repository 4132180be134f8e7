// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// memo: verify | train-toy | simulate | pipeline | emotion
//
// Reports go to files (or stdout) as JSON/CSV; human summaries go to stderr.
// Exit codes: 0 success, 1 failed property or runtime error, 2 usage or input error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memo/data_pipeline.hpp"
#include "memo/emotion.hpp"
#include "memo/generation_loop.hpp"
#include "memo/training.hpp"
#include "memo/verify.hpp"

namespace {

using ojson = nlohmann::ordered_json;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return in;
}

// Opens and parses an input file; parse failures become usage errors.
template <class Parse>
auto parse_file(const std::string& path, Parse parse) {
    std::ifstream in = open_in(path);
    try {
        return parse(in);
    } catch (const std::exception& e) {
        throw ValidationError("'" + path + "': " + e.what());
    }
}

std::vector<memo::EmotionLabel> read_labels(const std::string& path) {
    std::vector<memo::EmotionLabel> labels;
    for (const auto& p : parse_file(path, [](std::istream& in) { return memo::read_probability_rows(in); }))
        labels.push_back(memo::argmax_label(p));
    return labels;
}

void emit_json(const ojson& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        auto out = open_out(path);
        out << j.dump(2) << '\n';
    }
}

// ---- verify ----------------------------------------------------------------

struct VerifyArgs {
    std::string filter;
    std::size_t cases = 200;
    std::string report;
    bool list = false;
};

int cmd_verify(const VerifyArgs& a, std::uint64_t seed) {
    if (a.list) {
        for (const auto& n : memo::property_names()) std::cout << n << '\n';
        return 0;
    }
    memo::VerifyOptions opts;
    opts.filter = a.filter;
    opts.cases = a.cases;
    opts.seed = seed;
    const memo::VerifyReport report = memo::run_verify(opts);
    if (report.results.empty()) throw ValidationError("no property matches filter '" + a.filter + "'");
    emit_json(report.to_json(), a.report);
    for (const auto& r : report.results) {
        std::cerr << (r.passed ? "PASS " : "FAIL ") << r.name << "  max_error=" << r.max_error
                  << " tol=" << r.tolerance << " cases=" << r.cases_run;
        if (!r.detail.empty()) std::cerr << "  (" << r.detail << ")";
        std::cerr << '\n';
    }
    return report.all_passed() ? 0 : kExitFailure;
}

// ---- train-toy -------------------------------------------------------------

struct TrainArgs {
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    double learning_rate = memo::TrainConfig{}.learning_rate;
    double robust_threshold = memo::TrainConfig{}.robust_threshold;
    double dropout = memo::kDefaultConditionDropout;
    double signal_scale = memo::ToyTaskConfig{}.signal_scale;
    std::string reduction = "sum";
    std::vector<std::size_t> outlier_steps;
    std::vector<std::string> stages;
    std::string loss_curve;
    std::string report;
    std::string model_out;
};

// NAME:STEPS[:group+group...] where the groups are frozen in that stage.
memo::TrainingStage parse_stage(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
        throw ValidationError("stage '" + spec + "': expected NAME:STEPS[:frozen+groups]");
    memo::TrainingStage st;
    st.name = parts[0];
    try {
        st.steps = std::stoul(parts[1]);
    } catch (const std::exception&) {
        throw ValidationError("stage '" + spec + "': STEPS is not a number");
    }
    if (parts.size() == 3) {
        std::stringstream gs(parts[2]);
        for (std::string g; std::getline(gs, g, '+');) {
            try {
                st.frozen.insert(memo::parse_param_group(g));
            } catch (const std::invalid_argument& e) {
                throw ValidationError("stage '" + spec + "': " + e.what());
            }
        }
    }
    return st;
}

int cmd_train(const TrainArgs& a, std::uint64_t seed) {
    memo::TrainConfig cfg;
    cfg.steps = a.steps;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.learning_rate;
    cfg.robust_threshold = a.robust_threshold;
    cfg.dropout_p = a.dropout;
    cfg.task.signal_scale = a.signal_scale;
    cfg.reduction = memo::parse_loss_reduction(a.reduction);
    cfg.seed = seed;
    cfg.outlier_steps = a.outlier_steps;
    for (const auto& s : a.stages) cfg.stages.push_back(parse_stage(s));

    std::optional<memo::TrainResult> trained;
    try {
        trained.emplace(memo::train_toy(cfg));
    } catch (const memo::TrainingDiverged& e) {
        std::cerr << "memo train-toy: " << e.what() << '\n';
        return kExitFailure;
    }
    const memo::TrainResult& res = *trained;
    if (!a.loss_curve.empty()) {
        auto out = open_out(a.loss_curve);
        memo::write_loss_curve_csv(out, res.curve);
    }
    if (!a.model_out.empty()) {
        auto out = open_out(a.model_out);
        out << res.model.to_json() << '\n';
    }
    const double ratio = res.final_ema / res.initial_ema;
    ojson j;
    j["steps"] = res.state.step;
    j["seed"] = seed;
    j["learning_rate"] = cfg.learning_rate;
    j["robust_threshold"] = cfg.robust_threshold;
    j["initial_ema"] = res.initial_ema;
    j["final_ema"] = res.final_ema;
    j["final_over_initial"] = ratio;
    j["below_10_percent"] = ratio < 0.1;
    j["skipped_steps"] = res.skipped_steps;
    j["anomalies"] = res.state.anomalies;
    emit_json(j, a.report);
    std::cerr << "train-toy: " << res.state.step << " steps, EMA " << res.initial_ema << " -> " << res.final_ema
              << " (" << 100.0 * ratio << "% of initial), skipped " << res.skipped_steps.size() << " batches\n";
    return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
    std::size_t clips = 4;
    std::size_t clip_len = 16;
    std::size_t denoise_steps = 20;
    double fps = 30.0;
    double cfg_scale = memo::kDefaultCfgScale;
    double gamma = 0.9;
    std::string ablate_memory = "none";
    bool separate_memory_projections = false;
    bool degenerate_emotion = false;
    std::string model;
    std::string emotion_probs;
    std::string trace;
    std::string dump;
    std::string dump_format = "bin";
};

int cmd_simulate(const SimulateArgs& a, std::uint64_t seed) {
    memo::GenerationConfig gc;
    gc.fps = a.fps;
    gc.clip_len = a.clip_len;
    gc.cfg_scale = a.cfg_scale;
    gc.gamma = a.gamma;
    gc.denoise_steps = a.denoise_steps;
    gc.seed = seed;
    gc.ablation = memo::parse_memory_ablation(a.ablate_memory);
    try {
        gc.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (a.clips == 0) throw ValidationError("--clips must be >= 1");

    const memo::SeededRng root(seed);
    memo::SeededRng init_rng = root.derive(100);
    auto load_denoiser = [&]() {
        if (a.model.empty()) return memo::ToyDenoiser::initialize(memo::DenoiserConfig{}, init_rng, a.degenerate_emotion);
        return parse_file(a.model, [](std::istream& in) {
            std::stringstream ss;
            ss << in.rdbuf();
            return memo::ToyDenoiser::from_json(ss.str());
        });
    };
    memo::GenerationModel model{load_denoiser(), std::nullopt};
    const std::size_t d = model.dim();
    if (a.separate_memory_projections)
        model.memory_projections = memo::AttentionProjections::random(d, init_rng, 1.0 / std::sqrt(double(d)));

    const std::size_t frames = a.clips * a.clip_len;
    memo::SeededRng audio_rng = root.derive(101);
    const memo::AudioTimeline audio{a.fps, audio_rng.normal_matrix(frames, model.denoiser.config().audio_dim)};
    memo::EmotionTimeline emotions;
    if (a.emotion_probs.empty()) {
        emotions = memo::build_timeline(audio, memo::SyntheticClassifier(seed, 0.5), a.clip_len);
    } else {
        std::vector<memo::EmotionLabel> labels = read_labels(a.emotion_probs);
        if (labels.size() != frames)
            throw ValidationError("--emotion-probs has " + std::to_string(labels.size()) + " rows, need clips x clip-len = " +
                                  std::to_string(frames));
        emotions = memo::timeline_from_labels(std::move(labels), a.fps, a.clip_len);
    }
    memo::SeededRng ref_rng = root.derive(102);
    const memo::Vector reference = ref_rng.normal_vector(d);

    const memo::StreamResult res = memo::run_stream(gc, model, audio, emotions, a.clips, reference);

    if (!a.trace.empty()) {
        auto out = open_out(a.trace);
        memo::write_trace_jsonl(out, res.state.trace);
    }
    if (!a.dump.empty()) {
        if (a.dump_format == "bin") {
            auto out = open_out(a.dump, true);
            memo::write_clip_dump(out, res.clips);
        } else if (a.dump_format == "json") {
            auto out = open_out(a.dump);
            memo::write_clip_dump_json(out, res.clips);
        } else {
            throw ValidationError("--dump-format must be bin or json");
        }
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& t : res.state.trace) {
        lo = std::min(lo, t.memory_frobenius_norm);
        hi = std::max(hi, t.memory_frobenius_norm);
    }
    std::cerr << "simulate: " << res.clips.size() << " clips x " << gc.clip_len << " frames, ablation "
              << memo::to_string(gc.ablation) << ", memory norm range [" << lo << ", " << hi << "], frames absorbed "
              << res.state.memory.frames_absorbed << '\n';
    return 0;
}

// ---- pipeline --------------------------------------------------------------

struct PipelineArgs {
    std::string manifest;
    std::string out;
    std::string report;
    std::string rejected;
    std::size_t generate = 0;
    std::size_t threads = 1;
    bool synthetic_scorers = false;
    memo::Thresholds th;
};

int cmd_pipeline(const PipelineArgs& a, std::uint64_t seed) {
    if (a.generate > 0) {
        if (a.out.empty()) throw ValidationError("--generate needs --out");
        auto out = open_out(a.out);
        memo::write_manifest(out, memo::synthetic_manifest(a.generate, seed));
        std::cerr << "pipeline: wrote " << a.generate << " synthetic records to " << a.out << '\n';
        return 0;
    }
    if (a.manifest.empty()) throw ValidationError("--manifest is required");
    try {
        a.th.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    std::ifstream in = open_in(a.manifest);
    const auto records = memo::read_manifest(in);
    const memo::Scorers scorers = a.synthetic_scorers ? memo::Scorers::synthetic(seed) : memo::Scorers{};
    const memo::PipelineResult res = memo::run_pipeline(records, scorers, a.th, a.threads);
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        memo::write_manifest(out, res.kept);
    }
    if (!a.rejected.empty()) {
        auto out = open_out(a.rejected);
        memo::write_manifest(out, res.rejected);
    }
    emit_json(res.report.to_json(), a.report);
    std::cerr << "pipeline: " << res.report.input_count << " records after trim, kept " << res.report.kept << '\n';
    return 0;
}

// ---- emotion ---------------------------------------------------------------

struct EmotionArgs {
    std::string probs;
    std::size_t frames = 0;
    std::size_t subseg = memo::kDefaultSubsegmentFrames;
    double fps = 30.0;
    double window_s = memo::kDefaultWindowSeconds;
    std::string out;
    std::string merge_table;
    std::string dataset;
    std::string label;
};

int cmd_emotion(const EmotionArgs& a, std::uint64_t seed) {
    if (!a.label.empty()) {
        memo::LabelMergeTable table = memo::LabelMergeTable::builtin();
        if (!a.merge_table.empty()) {
            table = parse_file(a.merge_table, [](std::istream& in) { return memo::LabelMergeTable::parse(in); });
        }
        ojson j;
        j["dataset"] = a.dataset;
        j["label"] = a.label;
        j["merged"] = memo::to_string(memo::merge_label(a.dataset, a.label, table));
        emit_json(j, a.out);
        return 0;
    }
    memo::EmotionTimeline tl;
    if (!a.probs.empty()) {
        tl = memo::timeline_from_labels(read_labels(a.probs), a.fps, a.subseg);
    } else if (a.frames > 0) {
        memo::SeededRng rng = memo::SeededRng(seed).derive(101);
        const memo::AudioTimeline audio{a.fps, rng.normal_matrix(a.frames, memo::DenoiserConfig{}.audio_dim)};
        tl = memo::build_timeline(audio, memo::SyntheticClassifier(seed, 0.5), a.subseg, a.window_s);
    } else {
        throw ValidationError("emotion: give --probs FILE, --frames N, or --label");
    }
    const std::string text = memo::timeline_to_json(tl);
    if (a.out.empty() || a.out == "-") {
        std::cout << text << '\n';
    } else {
        auto out = open_out(a.out);
        out << text << '\n';
    }
    std::cerr << "emotion: " << tl.per_frame_labels.size() << " frames, " << tl.subsegments.size() << " subsegments\n";
    return 0;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("MEMO_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ValidationError(std::string("MEMO_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memo: memory-guided, emotion-aware streaming generation toolkit"};
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "TOML/INI config file; sections are subcommand names, flags override it");

    std::uint64_t seed = 0;
    bool seed_given = false;
    std::uint64_t env_seed = 1;
    try {
        env_seed = default_seed();
    } catch (const ValidationError& e) {
        std::cerr << "memo: " << e.what() << '\n';
        return kExitUsage;
    }
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option_function<std::uint64_t>(
               "--seed", [&](std::uint64_t s) { seed = s, seed_given = true; },
               "RNG seed (default: $MEMO_SEED or 1)");
    };

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "Run the randomized property suite");
    verify->add_option("--filter", va.filter, "Only properties whose name contains this text");
    verify->add_option("--cases", va.cases, "Random cases per property")->check(CLI::PositiveNumber);
    verify->add_option("--report", va.report, "Write the JSON report here (default stdout)");
    verify->add_flag("--list", va.list, "List property names");
    add_seed(verify);

    TrainArgs ta;
    auto* train = app.add_subcommand("train-toy", "Train the toy denoiser on the synthetic flow task");
    train->add_option("--steps", ta.steps, "Optimizer steps when no stages are given")->check(CLI::PositiveNumber);
    train->add_option("--batch-size", ta.batch_size, "Examples per step")->check(CLI::PositiveNumber);
    train->add_option("--lr", ta.learning_rate, "Learning rate");
    train->add_option("--robust-threshold", ta.robust_threshold, "Skip batches whose loss exceeds this");
    train->add_option("--dropout", ta.dropout, "Per-condition dropout probability");
    train->add_option("--signal-scale", ta.signal_scale, "Magnitude of the synthetic clean latents");
    train->add_option("--reduction", ta.reduction, "sum or mean")->check(CLI::IsMember({"sum", "mean"}));
    train->add_option("--outlier-steps", ta.outlier_steps, "Steps whose batch is corrupted");
    train->add_option("--stage", ta.stages, "NAME:STEPS[:frozen+groups], repeatable");
    train->add_option("--loss-curve", ta.loss_curve, "CSV loss curve output");
    train->add_option("--report", ta.report, "JSON report output (default stdout)");
    train->add_option("--model-out", ta.model_out, "Trained parameters as JSON");
    add_seed(train);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Stream clips through the generation loop");
    sim->add_option("--clips", sa.clips, "Number of clips")->check(CLI::PositiveNumber);
    sim->add_option("--clip-len", sa.clip_len, "Frames per clip")->check(CLI::PositiveNumber);
    sim->add_option("--denoise-steps", sa.denoise_steps, "Euler steps per clip")->check(CLI::PositiveNumber);
    sim->add_option("--fps", sa.fps, "Frame rate");
    sim->add_option("--cfg-scale", sa.cfg_scale, "Emotion guidance scale");
    sim->add_option("--gamma", sa.gamma, "Memory decay in (0, 1)");
    sim->add_option("--ablate-memory", sa.ablate_memory, "none, off or last1clip")
        ->check(CLI::IsMember({"none", "off", "last1clip"}));
    sim->add_flag("--separate-memory-projections", sa.separate_memory_projections, "Write memory with its own key/value projections");
    sim->add_flag("--degenerate-emotion", sa.degenerate_emotion, "Zero emotion modulation (CFG branches coincide)");
    sim->add_option("--model", sa.model, "Denoiser JSON from train-toy --model-out");
    sim->add_option("--emotion-probs", sa.emotion_probs, "Per-frame probability CSV");
    sim->add_option("--trace", sa.trace, "Trace JSONL output");
    sim->add_option("--dump", sa.dump, "Clip dump output");
    sim->add_option("--dump-format", sa.dump_format, "bin or json")->check(CLI::IsMember({"bin", "json"}));
    add_seed(sim);

    PipelineArgs pa;
    auto* pipe = app.add_subcommand("pipeline", "Filter a clip manifest");
    pipe->add_option("--manifest", pa.manifest, "Input JSONL manifest");
    pipe->add_option("--out", pa.out, "Kept records JSONL");
    pipe->add_option("--report", pa.report, "JSON report output (default stdout)");
    pipe->add_option("--rejected", pa.rejected, "Rejected records JSONL");
    pipe->add_option("--iqa-min", pa.th.iqa_min, "Keep clips with IQA above this");
    pipe->add_option("--sync-c-min", pa.th.sync_c_min, "Keep clips with Sync-C above this");
    pipe->add_option("--max-clip-s", pa.th.max_clip_s, "Split clips at or above this length");
    pipe->add_option("--bbox-scale", pa.th.bbox_scale, "Face crop scale about the box center");
    pipe->add_option("--threads", pa.threads, "Worker threads")->check(CLI::PositiveNumber);
    pipe->add_flag("--synthetic-scorers", pa.synthetic_scorers, "Score records with the seeded synthetic backends");
    pipe->add_option("--generate", pa.generate, "Write N synthetic records to --out instead of filtering");
    add_seed(pipe);

    EmotionArgs ea;
    auto* emo = app.add_subcommand("emotion", "Build an emotion timeline or merge a dataset label");
    emo->add_option("--probs", ea.probs, "Per-frame probability CSV (8 columns)");
    emo->add_option("--frames", ea.frames, "Synthetic audio length in frames");
    emo->add_option("--subseg", ea.subseg, "Frames per subsegment")->check(CLI::PositiveNumber);
    emo->add_option("--fps", ea.fps, "Frame rate");
    emo->add_option("--window-s", ea.window_s, "Classifier window in seconds");
    emo->add_option("--out", ea.out, "Output JSON (default stdout)");
    emo->add_option("--merge-table", ea.merge_table, "dataset,source,target table");
    emo->add_option("--dataset", ea.dataset, "Dataset for --label");
    emo->add_option("--label", ea.label, "Dataset label to merge");
    add_seed(emo);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }
    if (!seed_given) seed = env_seed;

    try {
        if (verify->parsed()) return cmd_verify(va, seed);
        if (train->parsed()) return cmd_train(ta, seed);
        if (sim->parsed()) return cmd_simulate(sa, seed);
        if (pipe->parsed()) return cmd_pipeline(pa, seed);
        if (emo->parsed()) return cmd_emotion(ea, seed);
    } catch (const ValidationError& e) {
        std::cerr << "memo " << app.get_subcommands().front()->get_name() << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "memo " << app.get_subcommands().front()->get_name() << ": " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
