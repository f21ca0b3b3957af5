// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokenprune/chair.hpp"
#include "tokenprune/complexity.hpp"
#include "tokenprune/core.hpp"

namespace tokenprune {

// TPK1 token dump layout (all little-endian):
//   0  char[4]  magic "TPK1"
//   4  u32      n_tokens
//   8  u32      dim
//   12 u8       has_attention (0/1)
//   13 u8[3]    reserved, must be zero
//   16 f32[n_tokens * dim]  embeddings, row-major
//      f32[n_tokens]        attention scores, only when has_attention = 1
inline constexpr std::array<char, 4> kDumpMagic = {'T', 'P', 'K', '1'};
inline constexpr std::size_t kDumpHeaderSize = 16;

struct TokenDump {
    TokenMatrix matrix;
    std::optional<AttentionVector> attention;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<unsigned char>((v >> shift) & 0xFFu));
    }
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<unsigned char>& out, double value) {
    const auto narrowed = static_cast<float>(value);
    if (!std::isfinite(narrowed)) {
        throw Error(ErrorCode::InvalidValue, "value does not fit in single precision");
    }
    put_u32(out, std::bit_cast<std::uint32_t>(narrowed));
}

inline float get_f32(const unsigned char* p) {
    return std::bit_cast<float>(get_u32(p));
}

}  // namespace detail

inline std::vector<unsigned char> encode_dump(const TokenMatrix& matrix,
                                              const std::optional<AttentionVector>& attention) {
    if (attention) {
        validate_pair(matrix, *attention);
    }
    if (matrix.rows() > std::numeric_limits<std::uint32_t>::max() ||
        matrix.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "matrix too large for a TPK1 header");
    }
    std::vector<unsigned char> out(kDumpMagic.begin(), kDumpMagic.end());
    detail::put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
    out.push_back(attention ? 1 : 0);
    out.resize(kDumpHeaderSize, 0);
    out.reserve(kDumpHeaderSize + 4 * (matrix.values().size() + (attention ? matrix.rows() : 0)));
    for (double v : matrix.values()) {
        detail::put_f32(out, v);
    }
    if (attention) {
        for (double s : attention->scores()) {
            detail::put_f32(out, s);
        }
    }
    return out;
}

inline TokenDump decode_dump(std::span<const unsigned char> bytes) {
    if (bytes.size() < kDumpHeaderSize) {
        throw Error(ErrorCode::TruncatedFile, "file shorter than the 16-byte header");
    }
    if (!std::equal(kDumpMagic.begin(), kDumpMagic.end(), bytes.begin())) {
        throw Error(ErrorCode::BadMagic, "missing TPK1 magic");
    }
    const std::uint32_t n_tokens = detail::get_u32(bytes.data() + 4);
    const std::uint32_t dim = detail::get_u32(bytes.data() + 8);
    const unsigned char has_attention = bytes[12];
    if (n_tokens == 0 || dim == 0) {
        throw Error(ErrorCode::HeaderMismatch, "header declares an empty matrix");
    }
    if (has_attention > 1) {
        throw Error(ErrorCode::HeaderMismatch, "has_attention flag must be 0 or 1");
    }
    for (std::size_t i = 13; i < kDumpHeaderSize; ++i) {
        if (bytes[i] != 0) {
            throw Error(ErrorCode::HeaderMismatch, "reserved header bytes must be zero");
        }
    }
    const std::uint64_t n_values = static_cast<std::uint64_t>(n_tokens) * dim;
    const std::uint64_t expected = kDumpHeaderSize + 4 * (n_values + (has_attention ? n_tokens : 0));
    if (bytes.size() != expected) {
        throw Error(ErrorCode::TruncatedFile,
                    "file is " + std::to_string(bytes.size()) + " bytes, header implies " + std::to_string(expected));
    }
    const unsigned char* p = bytes.data() + kDumpHeaderSize;
    std::vector<float> values(n_values);
    for (auto& v : values) {
        v = detail::get_f32(p);
        p += 4;
    }
    TokenDump dump{TokenMatrix::from_floats(n_tokens, dim, values), std::nullopt};
    if (has_attention) {
        std::vector<float> scores(n_tokens);
        for (auto& s : scores) {
            s = detail::get_f32(p);
            p += 4;
        }
        dump.attention = AttentionVector::from_floats(scores);
    }
    return dump;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TokenDump read_dump(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_dump(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

inline void write_dump(const std::filesystem::path& path, const TokenMatrix& matrix,
                       const std::optional<AttentionVector>& attention = std::nullopt) {
    const auto bytes = encode_dump(matrix, attention);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::IoFailure, "short write to " + path.string());
    }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

/// Lexicon file: a JSON object mapping surface form to canonical object.
inline ObjectLexicon load_lexicon(const std::filesystem::path& path) {
    const auto doc = read_json_file(path);
    if (!doc.is_object()) {
        throw Error(ErrorCode::ParseError, path.string() + ": lexicon must be a JSON object");
    }
    ObjectLexicon lexicon;
    for (const auto& [surface, canonical] : doc.items()) {
        if (!canonical.is_string()) {
            throw Error(ErrorCode::ParseError, path.string() + ": value for '" + surface + "' is not a string");
        }
        lexicon.add(surface, canonical.get<std::string>());
    }
    return lexicon;
}

/// Captions JSON-lines: {"caption": str, "gt_objects": [str, ...]} per line.
/// Ground-truth names go through the lexicon when they are known surface
/// forms; mentions are extracted here.
inline std::vector<CaptionRecord> load_captions(const std::filesystem::path& path, const ObjectLexicon& lexicon) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    std::vector<CaptionRecord> records;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, where + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("caption") || !obj["caption"].is_string() ||
            !obj.contains("gt_objects") || !obj["gt_objects"].is_array()) {
            throw Error(ErrorCode::ParseError, where + ": expected caption string and gt_objects array");
        }
        CaptionRecord record;
        record.caption = obj["caption"].get<std::string>();
        for (const auto& g : obj["gt_objects"]) {
            if (!g.is_string()) {
                throw Error(ErrorCode::ParseError, where + ": gt_objects entries must be strings");
            }
            const auto name = g.get<std::string>();
            record.gt_objects.insert(lexicon.lookup(name).value_or(join_words(normalize_words(name))));
        }
        record.mentioned_objects = extract_objects(record.caption, lexicon);
        records.push_back(std::move(record));
    }
    return records;
}

/// Corpus reference statistics file; erank_mean and entropy_mean are the
/// keys the pruning path reads, quartiles are optional.
inline nlohmann::json stats_to_json(const CorpusStats& s) {
    return {{"erank_mean", s.erank_mean},     {"erank_q1", s.erank_q1},
            {"erank_median", s.erank_median}, {"erank_q3", s.erank_q3},
            {"entropy_mean", s.entropy_mean}, {"entropy_q1", s.entropy_q1},
            {"entropy_median", s.entropy_median}, {"entropy_q3", s.entropy_q3},
            {"n_samples", s.n_samples}};
}

struct ReferenceStats {
    std::optional<double> erank_mean;
    std::optional<double> entropy_mean;
    std::optional<double> erank_q1;
    std::optional<double> erank_q3;
    std::optional<double> entropy_q1;
    std::optional<double> entropy_q3;
};

inline ReferenceStats load_stats(const std::filesystem::path& path) {
    const auto doc = read_json_file(path);
    if (!doc.is_object()) {
        throw Error(ErrorCode::ParseError, path.string() + ": stats must be a JSON object");
    }
    auto field = [&](const char* key) -> std::optional<double> {
        if (!doc.contains(key)) {
            return std::nullopt;
        }
        if (!doc[key].is_number()) {
            throw Error(ErrorCode::ParseError, path.string() + ": '" + key + "' must be a number");
        }
        return doc[key].get<double>();
    };
    ReferenceStats stats{field("erank_mean"), field("entropy_mean"), field("erank_q1"),
                         field("erank_q3"),   field("entropy_q1"),   field("entropy_q3")};
    if (!stats.erank_mean && !stats.entropy_mean) {
        throw Error(ErrorCode::ParseError, path.string() + ": needs erank_mean or entropy_mean");
    }
    return stats;
}

/// Resolves a corpus argument: a directory (every *.tpk inside, sorted), a
/// JSON manifest with a "dumps" array (paths relative to the manifest), or
/// a text file with one path per line.
inline std::vector<std::filesystem::path> resolve_dump_list(const std::filesystem::path& source) {
    namespace fs = std::filesystem;
    std::vector<fs::path> paths;
    if (fs::is_directory(source)) {
        for (const auto& entry : fs::directory_iterator(source)) {
            if (entry.is_regular_file() && entry.path().extension() == ".tpk") {
                paths.push_back(entry.path());
            }
        }
        std::sort(paths.begin(), paths.end());
    } else if (source.extension() == ".json") {
        const auto doc = read_json_file(source);
        if (!doc.is_object() || !doc.contains("dumps") || !doc["dumps"].is_array()) {
            throw Error(ErrorCode::ParseError, source.string() + ": manifest needs a 'dumps' array");
        }
        for (const auto& d : doc["dumps"]) {
            const fs::path p = d.is_object() ? d.at("path").get<std::string>() : d.get<std::string>();
            paths.push_back(p.is_absolute() ? p : source.parent_path() / p);
        }
    } else {
        std::ifstream in(source);
        if (!in) {
            throw Error(ErrorCode::IoFailure, "cannot open " + source.string());
        }
        for (std::string line; std::getline(in, line);) {
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') {
                continue;
            }
            const auto last = line.find_last_not_of(" \t\r");
            const fs::path p = line.substr(first, last - first + 1);
            paths.push_back(p.is_absolute() ? p : source.parent_path() / p);
        }
    }
    if (paths.empty()) {
        throw Error(ErrorCode::EmptyCorpus, source.string() + " lists no dumps");
    }
    return paths;
}

}  // namespace tokenprune
