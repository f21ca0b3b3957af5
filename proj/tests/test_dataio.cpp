// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "test_util.hpp"
#include "tokenprune/dataio.hpp"

using namespace tokenprune;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<unsigned char>;

ErrorCode decode_error(const Bytes& bytes) {
    try {
        decode_dump(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode unexpectedly succeeded";
    return ErrorCode::IoFailure;
}

Bytes header(std::uint32_t n, std::uint32_t d, unsigned char has_attention) {
    Bytes b = {'T', 'P', 'K', '1'};
    for (std::uint32_t v : {n, d}) {
        for (int s = 0; s < 32; s += 8) {
            b.push_back(static_cast<unsigned char>((v >> s) & 0xFF));
        }
    }
    b.push_back(has_attention);
    b.resize(16, 0);
    return b;
}

void append_float(Bytes& b, float f) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    for (int s = 0; s < 32; s += 8) {
        b.push_back(static_cast<unsigned char>((bits >> s) & 0xFF));
    }
}

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("tokenprune_dataio_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override {
        fs::remove_all(dir);
    }
    fs::path dir;
};

}  // namespace

TEST(Tpk1, ExactLayout) {
    const auto m = TokenMatrix::from_rows({{1.0, -2.0}});
    const AttentionVector a({0.5});
    Bytes expected = header(1, 2, 1);
    append_float(expected, 1.0f);
    append_float(expected, -2.0f);
    append_float(expected, 0.5f);
    EXPECT_EQ(encode_dump(m, a), expected);
    EXPECT_EQ(encode_dump(m, std::nullopt).size(), 16u + 8u);
}

TEST(Tpk1, RoundTripIsByteExact) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + trial * 7, d = 1 + trial * 3;
        const auto m = fixtures::random_matrix(rng, n, d);
        const auto a = fixtures::random_attention(rng, n);
        const std::optional<AttentionVector> attn = trial % 2 ? std::optional(a) : std::nullopt;
        const auto bytes = encode_dump(m, attn);
        const auto dump = decode_dump(bytes);
        EXPECT_EQ(encode_dump(dump.matrix, dump.attention), bytes);
        EXPECT_EQ(dump.attention.has_value(), attn.has_value());
    }
}

TEST_F(TempDir, FileRoundTrip) {
    std::mt19937_64 rng(2);
    const auto m = fixtures::random_matrix(rng, 9, 5);
    const auto a = fixtures::random_attention(rng, 9);
    write_dump(dir / "x.tpk", m, a);
    const auto original = read_file_bytes(dir / "x.tpk");
    const auto dump = read_dump(dir / "x.tpk");
    write_dump(dir / "y.tpk", dump.matrix, dump.attention);
    EXPECT_EQ(read_file_bytes(dir / "y.tpk"), original);
    EXPECT_EQ(dump.matrix(3, 2), static_cast<double>(static_cast<float>(m(3, 2))));
}

TEST(Tpk1, BadMagic) {
    Bytes b = header(1, 1, 0);
    b[3] = '0';
    append_float(b, 1.0f);
    EXPECT_EQ(decode_error(b), ErrorCode::BadMagic);
}

TEST(Tpk1, Truncated) {
    Bytes b = header(576, 1024, 1);
    b.resize(16 + 4 * 576 * 1024);  // attention block missing
    EXPECT_EQ(decode_error(b), ErrorCode::TruncatedFile);
    EXPECT_EQ(decode_error(Bytes{'T', 'P', 'K'}), ErrorCode::TruncatedFile);
    Bytes longer = header(1, 1, 0);
    append_float(longer, 1.0f);
    append_float(longer, 1.0f);
    EXPECT_EQ(decode_error(longer), ErrorCode::TruncatedFile);
}

TEST(Tpk1, NaNPayload) {
    Bytes b = header(2, 1, 0);
    append_float(b, 1.0f);
    append_float(b, std::numeric_limits<float>::quiet_NaN());
    EXPECT_EQ(decode_error(b), ErrorCode::InvalidValue);
    Bytes neg = header(1, 1, 1);
    append_float(neg, 1.0f);
    append_float(neg, -0.5f);
    EXPECT_EQ(decode_error(neg), ErrorCode::InvalidValue);
}

TEST(Tpk1, HeaderMismatch) {
    EXPECT_EQ(decode_error(header(0, 4, 0)), ErrorCode::HeaderMismatch);
    Bytes flag = header(1, 1, 2);
    append_float(flag, 1.0f);
    EXPECT_EQ(decode_error(flag), ErrorCode::HeaderMismatch);
    Bytes reserved = header(1, 1, 0);
    reserved[15] = 1;
    append_float(reserved, 1.0f);
    EXPECT_EQ(decode_error(reserved), ErrorCode::HeaderMismatch);
}

TEST(Tpk1, WriteRejectsUnrepresentable) {
    const auto m = TokenMatrix::from_rows({{1e300}});
    EXPECT_THROW(encode_dump(m, std::nullopt), Error);
}

TEST_F(TempDir, MissingFileIsIoFailure) {
    try {
        read_dump(dir / "absent.tpk");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoFailure);
    }
}

TEST_F(TempDir, CaptionsAndLexicon) {
    std::ofstream(dir / "lex.json") << R"({"puppy": "dog", "Dog": "dog", "dining table": "dining table", "table": "dining table"})";
    std::ofstream(dir / "caps.jsonl") << R"({"caption": "A puppy under the dining table.", "gt_objects": ["dog"]})" << "\n\n"
                                      << R"({"caption": "a cat", "gt_objects": ["Table"]})" << "\n";
    const auto lex = load_lexicon(dir / "lex.json");
    const auto records = load_captions(dir / "caps.jsonl", lex);
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].mentioned_objects, (std::set<std::string>{"dog", "dining table"}));
    EXPECT_EQ(records[1].gt_objects, (std::set<std::string>{"dining table"}));
    EXPECT_TRUE(records[1].mentioned_objects.empty());

    std::ofstream(dir / "bad.jsonl") << R"({"caption": 3})" << "\n";
    try {
        load_captions(dir / "bad.jsonl", lex);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
    std::ofstream(dir / "bad_lex.json") << R"(["dog"])";
    EXPECT_THROW(load_lexicon(dir / "bad_lex.json"), Error);
}

TEST_F(TempDir, StatsFile) {
    std::ofstream(dir / "s.json") << R"({"erank_mean": 94.87, "entropy_mean": 4.8, "erank_q1": 81.59})";
    const auto s = load_stats(dir / "s.json");
    EXPECT_EQ(s.erank_mean, 94.87);
    EXPECT_EQ(s.entropy_mean, 4.8);
    EXPECT_EQ(s.erank_q1, 81.59);
    EXPECT_FALSE(s.erank_q3.has_value());
    std::ofstream(dir / "empty.json") << "{}";
    EXPECT_THROW(load_stats(dir / "empty.json"), Error);
}

TEST_F(TempDir, DumpListSources) {
    const auto m = TokenMatrix::from_rows({{1.0}});
    for (const char* name : {"b.tpk", "a.tpk"}) {
        write_dump(dir / name, m, AttentionVector({1.0}));
    }
    std::ofstream(dir / "notes.txt") << "not a dump";
    const auto from_dir = resolve_dump_list(dir);
    ASSERT_EQ(from_dir.size(), 2u);
    EXPECT_EQ(from_dir[0].filename(), "a.tpk");

    std::ofstream(dir / "manifest.json") << R"({"dumps": [{"path": "b.tpk"}, "a.tpk"]})";
    const auto from_manifest = resolve_dump_list(dir / "manifest.json");
    EXPECT_EQ(from_manifest, (std::vector<fs::path>{dir / "b.tpk", dir / "a.tpk"}));

    std::ofstream(dir / "list.txt") << "# corpus\nb.tpk\n\n  a.tpk  \n";
    EXPECT_EQ(resolve_dump_list(dir / "list.txt"), (std::vector<fs::path>{dir / "b.tpk", dir / "a.tpk"}));

    std::ofstream(dir / "none.txt") << "\n";
    EXPECT_THROW(resolve_dump_list(dir / "none.txt"), Error);
}
