// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the memo executable end to end.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memo/data_pipeline.hpp"
#include "memo/generation_loop.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = MEMO_CLI_PATH;
const fs::path kFixtures = MEMO_FIXTURE_DIR;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("memo_cli_") + info->name() + "_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // Runs the CLI with stdout/stderr captured to files; returns the exit code.
    int run(const std::string& args, const std::string& env = "") {
        const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args + " > '" + path("stdout") +
                                "' 2> '" + path("stderr") + "'";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return slurp(path("stdout")); }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

TEST_F(Cli, VerifyPasses) {
    EXPECT_EQ(run("verify --cases 20 --report " + path("r.json")), 0) << slurp(path("stderr"));
    const auto j = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_TRUE(j["passed"].get<bool>());
}

TEST_F(Cli, VerifyListAndUnknownFilter) {
    EXPECT_EQ(run("verify --list"), 0);
    EXPECT_NE(out().find("memory.chunk_invariance"), std::string::npos);
    EXPECT_EQ(run("verify --filter no.such.property"), 2);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("simulate --no-such-flag"), 2);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("pipeline"), 2);
    EXPECT_EQ(run("pipeline --manifest " + path("missing.jsonl")), 2);
    EXPECT_EQ(run("simulate --ablate-memory sometimes"), 2);
    EXPECT_EQ(run("simulate --gamma 1.5"), 2);
    EXPECT_EQ(run("verify --list", "MEMO_SEED=abc"), 2);
    EXPECT_EQ(run("pipeline --manifest " + (kFixtures / "m100.jsonl").string() + " --bbox-scale 0.5"), 2);
}

TEST_F(Cli, EmotionTimelineFromProbabilities) {
    ASSERT_EQ(run("emotion --probs " + (kFixtures / "probs.csv").string()), 0) << slurp(path("stderr"));
    const auto j = nlohmann::json::parse(out());
    ASSERT_EQ(j["per_frame_labels"].size(), 33u);
    const auto& s = j["subsegments"];
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0]["start_frame"], 0);
    EXPECT_EQ(s[0]["end_frame"], 16);
    EXPECT_EQ(s[0]["label"], "happy");
    EXPECT_EQ(s[1]["end_frame"], 32);
    EXPECT_EQ(s[1]["label"], "angry");  // 8 sad vs 8 angry: lowest index wins
    EXPECT_EQ(s[2]["end_frame"], 33);
    EXPECT_EQ(s[2]["label"], "surprised");
    EXPECT_EQ(j["per_frame_labels"][15], "happy");  // happy/sad probability tie
}

TEST_F(Cli, EmotionLabelMerge) {
    ASSERT_EQ(run("emotion --dataset ASVP-ESD --label pleasure"), 0);
    EXPECT_EQ(nlohmann::json::parse(out())["merged"], "happy");
    ASSERT_EQ(run("emotion --dataset any --label boredom-like-unmapped"), 0);
    EXPECT_EQ(nlohmann::json::parse(out())["merged"], "others");
}

TEST_F(Cli, PipelineFixtureMatchesLibrary) {
    const auto manifest = (kFixtures / "m100.jsonl").string();
    ASSERT_EQ(run("pipeline --manifest " + manifest + " --out " + path("kept.jsonl") + " --rejected " +
                  path("rej.jsonl") + " --report " + path("report.json")),
              0)
        << slurp(path("stderr"));
    std::ifstream in(manifest);
    const auto res = memo::run_pipeline(memo::read_manifest(in), memo::Scorers{}, memo::Thresholds{});
    std::ostringstream kept, rejected;
    memo::write_manifest(kept, res.kept);
    memo::write_manifest(rejected, res.rejected);
    EXPECT_EQ(slurp(path("kept.jsonl")), kept.str());
    EXPECT_EQ(slurp(path("rej.jsonl")), rejected.str());
    const auto report = nlohmann::json::parse(slurp(path("report.json")));
    std::size_t total = report["kept"].get<std::size_t>();
    for (const auto& [reason, n] : report["rejected"].items()) total += n.get<std::size_t>();
    EXPECT_EQ(total, report["input_count"].get<std::size_t>());
    EXPECT_EQ(report["thresholds_used"]["sync_c_min"], 5.0);
}

TEST_F(Cli, PipelineFixtureIsReproducible) {
    ASSERT_EQ(run("pipeline --generate 100 --seed 5 --out " + path("gen.jsonl")), 0);
    EXPECT_EQ(slurp(path("gen.jsonl")), slurp((kFixtures / "m100.jsonl").string()));
}

TEST_F(Cli, PipelineThreadsDoNotChangeOutput) {
    const auto manifest = (kFixtures / "m100.jsonl").string();
    ASSERT_EQ(run("pipeline --synthetic-scorers --manifest " + manifest + " --out " + path("a.jsonl")), 0);
    ASSERT_EQ(run("pipeline --synthetic-scorers --threads 4 --manifest " + manifest + " --out " + path("b.jsonl")), 0);
    EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
}

TEST_F(Cli, SimulateDeterministicAndSeedFromEnv) {
    ASSERT_EQ(run("simulate --clips 12 --seed 3 --dump " + path("a.bin") + " --trace " + path("a.jsonl")), 0);
    ASSERT_EQ(run("simulate --clips 12 --dump " + path("b.bin") + " --trace " + path("b.jsonl"), "MEMO_SEED=3"), 0);
    EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
    EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
    std::ifstream dump(path("a.bin"), std::ios::binary);
    const auto clips = memo::read_clip_dump(dump);
    EXPECT_EQ(clips.size(), 12u);
    EXPECT_EQ(clips[0].rows(), 16u);
}

TEST_F(Cli, SimulateAblationChangesTrace) {
    ASSERT_EQ(run("simulate --clips 8 --trace " + path("none.jsonl")), 0);
    ASSERT_EQ(run("simulate --clips 8 --ablate-memory last1clip --trace " + path("last.jsonl")), 0);
    ASSERT_EQ(run("simulate --clips 8 --ablate-memory off --trace " + path("off.jsonl")), 0);
    EXPECT_NE(slurp(path("none.jsonl")), slurp(path("last.jsonl")));
    EXPECT_NE(slurp(path("none.jsonl")), slurp(path("off.jsonl")));
}

TEST_F(Cli, SimulateDegenerateEmotionIgnoresGuidance) {
    ASSERT_EQ(run("simulate --clips 4 --degenerate-emotion --cfg-scale 0 --dump " + path("a.bin")), 0);
    ASSERT_EQ(run("simulate --clips 4 --degenerate-emotion --cfg-scale 3.5 --dump " + path("b.bin")), 0);
    EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
}

TEST_F(Cli, SimulateJsonDump) {
    ASSERT_EQ(run("simulate --clips 2 --dump-format json --dump " + path("d.json")), 0);
    const auto j = nlohmann::json::parse(slurp(path("d.json")));
    EXPECT_EQ(j["n_clips"], 2);
    EXPECT_EQ(j["data"].size(), 2u);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
    {
        std::ofstream cfg(path("memo.toml"));
        cfg << "[simulate]\nclips = 3\ngamma = 0.5\n";
    }
    ASSERT_EQ(run("--config " + path("memo.toml") + " simulate --trace " + path("t.jsonl")), 0) << slurp(path("stderr"));
    std::ifstream t(path("t.jsonl"));
    int lines = 0;
    for (std::string l; std::getline(t, l);) ++lines;
    EXPECT_EQ(lines, 3);
    ASSERT_EQ(run("--config " + path("memo.toml") + " simulate --clips 5 --trace " + path("u.jsonl")), 0);
    std::ifstream u(path("u.jsonl"));
    lines = 0;
    for (std::string l; std::getline(u, l);) ++lines;
    EXPECT_EQ(lines, 5);
    {
        std::ofstream bad(path("bad.toml"));
        bad << "[simulate]\nclipz = 3\n";
    }
    EXPECT_EQ(run("--config " + path("bad.toml") + " simulate"), 2);
}

TEST_F(Cli, TrainToyReport) {
    ASSERT_EQ(run("train-toy --steps 300 --outlier-steps 5 --outlier-steps 50 --report " + path("r.json") +
                  " --loss-curve " + path("c.csv") + " --model-out " + path("m.json")),
              0)
        << slurp(path("stderr"));
    const auto j = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_EQ(j["skipped_steps"], (std::vector<int>{5, 50}));
    EXPECT_LT(j["final_ema"].get<double>(), j["initial_ema"].get<double>());
    ASSERT_EQ(run("simulate --clips 2 --model " + path("m.json")), 0) << slurp(path("stderr"));
}

TEST_F(Cli, TrainToyStages) {
    ASSERT_EQ(run("train-toy --stage audio:50:emotion+modulation --stage emotion:50:input --report " + path("r.json")), 0)
        << slurp(path("stderr"));
    EXPECT_EQ(nlohmann::json::parse(slurp(path("r.json")))["steps"], 100);
    EXPECT_EQ(run("train-toy --stage broken"), 2);
    EXPECT_EQ(run("train-toy --stage a:10:no-such-group"), 2);
}

TEST_F(Cli, BadInputFilesExitTwo) {
    const auto probs = (kFixtures / "probs.csv").string();
    EXPECT_EQ(run("simulate --clips 2 --emotion-probs " + probs), 2);
    {
        std::ofstream bad(path("bad.csv"));
        bad << "0.5,0.5\n";
    }
    EXPECT_EQ(run("emotion --probs " + path("bad.csv")), 2);
    {
        std::ofstream bad(path("model.json"));
        bad << "{\"not\": \"a model\"}\n";
    }
    EXPECT_EQ(run("simulate --clips 2 --model " + path("model.json")), 2);
    {
        std::ofstream bad(path("table.csv"));
        bad << "D,x,not-an-emotion\n";
    }
    EXPECT_EQ(run("emotion --dataset D --label x --merge-table " + path("table.csv")), 2);
}

TEST_F(Cli, SimulateWithProbabilityTimeline) {
    {
        std::ofstream csv(path("p.csv"));
        for (int i = 0; i < 32; ++i) csv << (i < 16 ? "0,0,0,1,0,0,0,0\n" : "0,0,0,0,0,1,0,0\n");
    }
    ASSERT_EQ(run("simulate --clips 2 --emotion-probs " + path("p.csv") + " --trace " + path("t.jsonl")), 0)
        << slurp(path("stderr"));
    std::ifstream t(path("t.jsonl"));
    std::vector<std::string> emotions;
    for (std::string l; std::getline(t, l);) emotions.push_back(nlohmann::json::parse(l)["emotion"]);
    EXPECT_EQ(emotions, (std::vector<std::string>{"happy", "sad"}));
}

}  // namespace
