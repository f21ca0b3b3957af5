// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "tokenprune/cli.hpp"
#include "tokenprune/dataio.hpp"
#include "tokenprune/harness.hpp"

using namespace tokenprune;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "tokenprune");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> csv_column(const std::string& text, std::size_t column) {
    std::istringstream in(text);
    std::vector<std::string> cells;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        for (std::size_t c = 0; c <= column; ++c) {
            std::getline(row, cell, ',');
        }
        cells.push_back(cell);
    }
    return cells;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("tokenprune_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override {
        fs::remove_all(dir);
    }
    std::string path(const std::string& name) const {
        return (dir / name).string();
    }
    fs::path dir;
};

}  // namespace

TEST_F(Cli, MetricsOnIdenticalRows) {
    const auto m = TokenMatrix::from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    write_dump(path("same.tpk"), m, AttentionVector({1, 1, 1, 1}));
    const auto r = run({"metrics", path("same.tpk")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(r.out);
    EXPECT_NEAR(doc["erank_fast"].get<double>(), 1.0, 1e-6);
    EXPECT_NEAR(doc["erank_svd"].get<double>(), 1.0, 1e-6);
    EXPECT_NEAR(doc["attention_entropy"].get<double>(), std::log(4.0), 1e-12);
    EXPECT_EQ(doc["n_tokens"], 4);

    write_dump(path("bare.tpk"), m);
    EXPECT_TRUE(json::parse(run({"metrics", path("bare.tpk")}).out)["attention_entropy"].is_null());
}

TEST_F(Cli, ZeroScaleThresholdEqualsTopK) {
    std::mt19937_64 rng(1);
    write_dump(path("x.tpk"), fixtures::random_matrix(rng, 50, 8), fixtures::random_attention(rng, 50));
    const auto topk = run({"prune", path("x.tpk"), "--method", "attention_topk", "--budget", "10"});
    const auto thr = run({"prune", path("x.tpk"), "--method", "adaptive_threshold", "--budget", "10",
                          "--tau-scale", "0"});
    ASSERT_EQ(topk.code, 0) << topk.err;
    ASSERT_EQ(thr.code, 0) << thr.err;
    const auto a = json::parse(topk.out), b = json::parse(thr.out);
    EXPECT_EQ(a["indices"], b["indices"]);
    EXPECT_EQ(b["k_effective"], 10);
    EXPECT_TRUE(b.contains("trace"));
}

TEST_F(Cli, ThresholdNeedsReference) {
    std::mt19937_64 rng(2);
    write_dump(path("x.tpk"), fixtures::random_matrix(rng, 20, 4), fixtures::random_attention(rng, 20));
    const auto missing = run({"prune", path("x.tpk"), "--method", "adaptive_threshold", "--budget", "5"});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("error:"), std::string::npos);
    std::ofstream(path("stats.json")) << R"({"erank_mean": 3.5, "entropy_mean": 2.9})";
    const auto with_stats = run({"prune", path("x.tpk"), "--method", "adaptive_threshold", "--budget", "5",
                                 "--stats", path("stats.json")});
    EXPECT_EQ(with_stats.code, 0) << with_stats.err;
}

TEST_F(Cli, ShippedReferenceStats) {
    const auto stats = load_stats(TOKENPRUNE_SOURCE_DIR "/config/clip_l_576_stats.json");
    EXPECT_EQ(stats.erank_mean, clip_l_576::erank_mean);
    EXPECT_EQ(stats.entropy_mean, clip_l_576::entropy_mean);
    EXPECT_EQ(stats.erank_q1, clip_l_576::erank_q1);
    EXPECT_EQ(stats.erank_q3, clip_l_576::erank_q3);
    EXPECT_EQ(stats.entropy_q1, clip_l_576::entropy_q1);
    EXPECT_EQ(stats.entropy_q3, clip_l_576::entropy_q3);

    const auto [m, a] = harness::generate(harness::default_spec(harness::Population::complex, 1));
    write_dump(path("c.tpk"), m, a);
    const auto r = run({"prune", path("c.tpk"), "--method", "hybrid_adaptive", "--budget", "64", "--stats",
                        TOKENPRUNE_SOURCE_DIR "/config/clip_l_576_stats.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(r.out);
    EXPECT_EQ(doc["k_effective"], 64);
    const auto stored = read_dump(path("c.tpk")).matrix;
    const double expected = adaptive_mix_ratio(erank(stored), clip_l_576::erank_q1, clip_l_576::erank_q3);
    EXPECT_NEAR(doc["diagnostics"]["mix_ratio"].get<double>(), expected, 1e-12);
}

TEST_F(Cli, FpsWithoutAttention) {
    const auto m = TokenMatrix::from_rows({{0.0}, {1.0}, {2.0}, {10.0}});
    write_dump(path("line.tpk"), m);
    const auto r = run({"prune", path("line.tpk"), "--method", "fps", "--budget", "2", "--start", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["selection_order"], json::array({0, 3}));
    EXPECT_EQ(run({"prune", path("line.tpk"), "--method", "attention_topk", "--budget", "2"}).code, 1);
}

TEST_F(Cli, UnknownFlagAndMethodRejected) {
    std::mt19937_64 rng(3);
    write_dump(path("x.tpk"), fixtures::random_matrix(rng, 5, 2), fixtures::random_attention(rng, 5));
    EXPECT_NE(run({"prune", path("x.tpk"), "--method", "fps", "--budget", "2", "--bogus", "1"}).code, 0);
    EXPECT_EQ(run({"prune", path("x.tpk"), "--method", "random", "--budget", "2"}).code, 1);
    EXPECT_NE(run({}).code, 0);
    EXPECT_EQ(run({"metrics", path("absent.tpk")}).code, 1);
}

TEST_F(Cli, SynthStatsAndSweep) {
    const auto synth = run({"synth", "--population", "complex", "--count", "6", "--seed", "10", "--out", path("c")});
    ASSERT_EQ(synth.code, 0) << synth.err;
    EXPECT_TRUE(fs::exists(dir / "c" / "complex_0005.tpk"));
    EXPECT_TRUE(fs::exists(dir / "c" / "manifest.json"));

    const auto stats = run({"corpus-stats", path("c/manifest.json")});
    ASSERT_EQ(stats.code, 0) << stats.err;
    EXPECT_EQ(json::parse(stats.out)["n_samples"], 6);

    const std::vector<std::string> args = {"sweep", path("c"), "--budget", "64", "--tau-scale-grid",
                                           "0,0.005,0.01,0.02"};
    const auto sweep = run(args);
    ASSERT_EQ(sweep.code, 0) << sweep.err;
    EXPECT_EQ(sweep.out.substr(0, sweep.out.find('\n')), "tau_scale,mean_erank_retained,mean_refilled");
    const auto column = csv_column(sweep.out, 1);
    ASSERT_EQ(column.size(), 4u);
    for (std::size_t i = 1; i < column.size(); ++i) {
        EXPECT_GE(std::stod(column[i]), std::stod(column[i - 1]));
    }
    EXPECT_EQ(run(args).out, sweep.out);
    EXPECT_EQ(run({"sweep", path("c"), "--budget", "64", "--tau-scale-grid", "0,x"}).code, 1);
}

TEST_F(Cli, Chair) {
    std::ofstream(path("lex.json")) << R"({"dog": "dog", "puppy": "dog", "cat": "cat"})";
    std::ofstream(path("caps.jsonl")) << R"({"caption": "a puppy and a cat", "gt_objects": ["dog"]})" << '\n'
                                      << R"({"caption": "a dog", "gt_objects": ["dog", "cat"]})" << '\n';
    const auto r = run({"chair", "--captions", path("caps.jsonl"), "--lexicon", path("lex.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = json::parse(r.out);
    EXPECT_EQ(doc["C_S"].get<double>(), 0.5);
    EXPECT_EQ(doc["C_I"].get<double>(), 1.0 / 3.0);
    EXPECT_EQ(doc["recall"].get<double>(), 2.0 / 3.0);
    EXPECT_EQ(doc["mean_len"].get<double>(), 3.5);
}
