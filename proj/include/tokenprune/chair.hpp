// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tokenprune/error.hpp"

namespace tokenprune {

/// Lower-cases and splits text into words; punctuation acts as a separator.
inline std::vector<std::string> normalize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || std::ispunct(c)) {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}

inline std::string join_words(std::span<const std::string> words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += w;
    }
    return out;
}

/// Canonical object vocabulary plus surface-form synonyms. Every canonical
/// object is also its own synonym. Matching is case-insensitive.
class ObjectLexicon {
public:
    ObjectLexicon() = default;

    explicit ObjectLexicon(const std::map<std::string, std::string>& synonyms) {
        for (const auto& [surface, canonical] : synonyms) {
            add(surface, canonical);
        }
    }

    void add(std::string_view surface, std::string_view canonical) {
        const auto surface_words = normalize_words(surface);
        const auto canonical_words = normalize_words(canonical);
        if (surface_words.empty() || canonical_words.empty()) {
            throw Error(ErrorCode::InvalidArgument, "lexicon entries must contain at least one word");
        }
        const std::string key = join_words(surface_words);
        const std::string target = join_words(canonical_words);
        auto existing = m_synonyms.find(key);
        if (existing != m_synonyms.end() && existing->second != target) {
            throw Error(ErrorCode::InvalidArgument,
                        "surface form '" + key + "' maps to both '" + existing->second + "' and '" + target + "'");
        }
        m_synonyms[key] = target;
        m_max_words = std::max(m_max_words, surface_words.size());
        if (m_objects.insert(target).second) {
            m_synonyms.emplace(target, target);
            m_max_words = std::max(m_max_words, canonical_words.size());
        }
    }

    std::optional<std::string> lookup(std::string_view surface) const {
        auto it = m_synonyms.find(join_words(normalize_words(surface)));
        if (it == m_synonyms.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    const std::set<std::string>& objects() const noexcept {
        return m_objects;
    }
    std::size_t max_phrase_words() const noexcept {
        return m_max_words;
    }

private:
    std::map<std::string, std::string> m_synonyms;
    std::set<std::string> m_objects;
    std::size_t m_max_words = 0;
};

/// Canonical objects mentioned in a caption. Scans left to right and at
/// each position takes the longest lexicon phrase that matches.
inline std::set<std::string> extract_objects(std::string_view caption, const ObjectLexicon& lexicon) {
    const auto words = normalize_words(caption);
    std::set<std::string> found;
    std::size_t i = 0;
    while (i < words.size()) {
        std::size_t matched = 0;
        const std::size_t longest = std::min(lexicon.max_phrase_words(), words.size() - i);
        for (std::size_t len = longest; len >= 1; --len) {
            if (auto canonical = lexicon.lookup(join_words(std::span(words).subspan(i, len)))) {
                found.insert(*canonical);
                matched = len;
                break;
            }
        }
        i += std::max<std::size_t>(matched, 1);
    }
    return found;
}

struct CaptionRecord {
    std::string caption;
    std::set<std::string> gt_objects;
    std::set<std::string> mentioned_objects;
};

inline void populate_mentions(std::span<CaptionRecord> records, const ObjectLexicon& lexicon) {
    for (auto& r : records) {
        r.mentioned_objects = extract_objects(r.caption, lexicon);
    }
}

struct ChairReport {
    double c_s = 0.0;
    double c_i = 0.0;
    double recall = 0.0;
    double mean_len = 0.0;
    std::size_t n_captions = 0;
    // False when the denominator was zero and the ratio was reported as 0.
    bool c_i_defined = true;
    bool recall_defined = true;
};

inline std::size_t count_words(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::size_t n = 0;
    for (std::string w; in >> w;) {
        ++n;
    }
    return n;
}

/// Sentence-level (C_S) and instance-level (C_I) hallucination rates, with
/// corpus-level recall and mean caption length. Each distinct object counts
/// once per caption.
inline ChairReport chair_metrics(std::span<const CaptionRecord> records) {
    if (records.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "no captions to score");
    }
    std::size_t mentions = 0;
    std::size_t hallucinated = 0;
    std::size_t hallucinated_captions = 0;
    std::size_t gt_total = 0;
    std::size_t gt_covered = 0;
    std::size_t words = 0;
    for (const auto& r : records) {
        std::size_t bad = 0;
        for (const auto& obj : r.mentioned_objects) {
            if (r.gt_objects.contains(obj)) {
                ++gt_covered;
            } else {
                ++bad;
            }
        }
        mentions += r.mentioned_objects.size();
        hallucinated += bad;
        hallucinated_captions += bad > 0 ? 1 : 0;
        gt_total += r.gt_objects.size();
        words += count_words(r.caption);
    }
    ChairReport report;
    report.n_captions = records.size();
    const auto n = static_cast<double>(records.size());
    report.c_s = static_cast<double>(hallucinated_captions) / n;
    report.c_i_defined = mentions > 0;
    report.c_i = mentions > 0 ? static_cast<double>(hallucinated) / static_cast<double>(mentions) : 0.0;
    report.recall_defined = gt_total > 0;
    report.recall = gt_total > 0 ? static_cast<double>(gt_covered) / static_cast<double>(gt_total) : 0.0;
    report.mean_len = static_cast<double>(words) / n;
    return report;
}

}  // namespace tokenprune
