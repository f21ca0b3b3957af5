// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokenprune/error.hpp"

namespace tokenprune {

/// N x d token embedding matrix, row-major, one row per visual token in
/// encoder order. Immutable once constructed; construction validates shape
/// and finiteness.
class TokenMatrix {
public:
    TokenMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : m_rows(rows),
          m_cols(cols),
          m_values(std::move(values)) {
        if (m_rows == 0 || m_cols == 0) {
            throw Error(ErrorCode::EmptyInput, "token matrix needs at least one row and one column");
        }
        if (m_values.size() != m_rows * m_cols) {
            throw Error(ErrorCode::DimensionMismatch,
                        "token matrix payload has " + std::to_string(m_values.size()) + " values, expected " +
                            std::to_string(m_rows * m_cols));
        }
        for (double v : m_values) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::InvalidValue, "token matrix contains a non-finite value");
            }
        }
    }

    /// Single-precision ingestion; values are widened to double.
    static TokenMatrix from_floats(std::size_t rows, std::size_t cols, std::span<const float> values) {
        return TokenMatrix(rows, cols, std::vector<double>(values.begin(), values.end()));
    }

    static TokenMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) {
            throw Error(ErrorCode::EmptyInput, "token matrix needs at least one row");
        }
        const std::size_t cols = rows.front().size();
        std::vector<double> values;
        values.reserve(rows.size() * cols);
        for (const auto& r : rows) {
            if (r.size() != cols) {
                throw Error(ErrorCode::DimensionMismatch, "ragged rows");
            }
            values.insert(values.end(), r.begin(), r.end());
        }
        return TokenMatrix(rows.size(), cols, std::move(values));
    }

    std::size_t rows() const noexcept {
        return m_rows;
    }
    std::size_t cols() const noexcept {
        return m_cols;
    }
    std::span<const double> values() const noexcept {
        return m_values;
    }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(m_values).subspan(i * m_cols, m_cols);
    }
    double operator()(std::size_t i, std::size_t j) const {
        return m_values[i * m_cols + j];
    }

    /// Sub-matrix made of the given rows, in the order given.
    TokenMatrix select_rows(std::span<const std::size_t> indices) const {
        std::vector<double> values;
        values.reserve(indices.size() * m_cols);
        for (std::size_t i : indices) {
            if (i >= m_rows) {
                throw Error(ErrorCode::InvalidArgument, "row index " + std::to_string(i) + " out of range");
            }
            auto r = row(i);
            values.insert(values.end(), r.begin(), r.end());
        }
        return TokenMatrix(indices.size(), m_cols, std::move(values));
    }

private:
    std::size_t m_rows;
    std::size_t m_cols;
    std::vector<double> m_values;
};

/// Head-averaged CLS-to-patch attention over the N patch tokens. The CLS
/// self-score is never stored here.
class AttentionVector {
public:
    explicit AttentionVector(std::vector<double> scores) : m_scores(std::move(scores)) {
        if (m_scores.empty()) {
            throw Error(ErrorCode::EmptyInput, "attention vector is empty");
        }
        bool any_positive = false;
        for (double s : m_scores) {
            if (!std::isfinite(s) || s < 0.0) {
                throw Error(ErrorCode::InvalidValue, "attention scores must be finite and non-negative");
            }
            any_positive = any_positive || s > 0.0;
        }
        if (!any_positive) {
            throw Error(ErrorCode::InvalidValue, "attention vector has no positive score");
        }
    }

    static AttentionVector from_floats(std::span<const float> scores) {
        return AttentionVector(std::vector<double>(scores.begin(), scores.end()));
    }

    std::size_t size() const noexcept {
        return m_scores.size();
    }
    std::span<const double> scores() const noexcept {
        return m_scores;
    }
    double operator[](std::size_t i) const {
        return m_scores[i];
    }

private:
    std::vector<double> m_scores;
};

inline void validate_pair(const TokenMatrix& matrix, const AttentionVector& attn) {
    if (matrix.rows() != attn.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "matrix has " + std::to_string(matrix.rows()) + " tokens but attention has " +
                        std::to_string(attn.size()) + " scores");
    }
}

struct ComplexityProfile {
    double erank = 1.0;
    double attention_entropy = 0.0;
    std::size_t n_tokens = 0;
};

enum class Method { attention_topk, fps, hybrid_fixed, hybrid_adaptive, adaptive_threshold };

enum class ComplexitySignal { erank, attention_entropy };

constexpr std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::attention_topk: return "attention_topk";
    case Method::fps: return "fps";
    case Method::hybrid_fixed: return "hybrid_fixed";
    case Method::hybrid_adaptive: return "hybrid_adaptive";
    case Method::adaptive_threshold: return "adaptive_threshold";
    }
    return "unknown";
}

constexpr std::string_view to_string(ComplexitySignal s) noexcept {
    return s == ComplexitySignal::erank ? "erank" : "entropy";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::attention_topk, Method::fps, Method::hybrid_fixed, Method::hybrid_adaptive,
                     Method::adaptive_threshold}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

inline ComplexitySignal parse_signal(std::string_view name) {
    if (name == "erank") {
        return ComplexitySignal::erank;
    }
    if (name == "entropy" || name == "attention_entropy") {
        return ComplexitySignal::attention_entropy;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown complexity signal '" + std::string(name) + "'");
}

/// Statistics measured on the LLaVA-1.5 / CLIP-L (576 tokens) training
/// images. Only meaningful for that encoder; other corpora must measure
/// their own with corpus_stats().
namespace clip_l_576 {
inline constexpr double erank_mean = 94.87;
inline constexpr double erank_median = 95.40;
inline constexpr double erank_q1 = 81.59;
inline constexpr double erank_q3 = 108.80;
inline constexpr double entropy_mean = 4.80;
inline constexpr double entropy_median = 4.78;
inline constexpr double entropy_q1 = 4.63;
inline constexpr double entropy_q3 = 4.96;
}  // namespace clip_l_576

struct PruneConfig {
    std::size_t budget = 64;
    Method method = Method::attention_topk;
    double tau_max = 0.25;
    double tau_scale = 0.01;
    // Corpus reference averages; no default because they are corpus specific.
    std::optional<double> erank_avg;
    std::optional<double> entropy_avg;
    // Complexity band for adaptive mixing, in units of the chosen signal.
    double mix_lo = clip_l_576::erank_q1;
    double mix_hi = clip_l_576::erank_q3;
    ComplexitySignal complexity_signal = ComplexitySignal::erank;
    double fixed_ratio = 0.5;
    double budget_adapt_fraction = 0.0;
    // FPS seed; nullopt means the max-attention token.
    std::optional<std::size_t> fps_start;

    void validate() const {
        if (budget < 1) {
            throw Error(ErrorCode::InvalidArgument, "budget must be at least 1");
        }
        if (!(tau_max > 0.0 && tau_max <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "tau_max must lie in (0, 1]");
        }
        if (!(tau_scale >= 0.0) || !std::isfinite(tau_scale)) {
            throw Error(ErrorCode::InvalidArgument, "tau_scale must be finite and non-negative");
        }
        if (!(fixed_ratio >= 0.0 && fixed_ratio <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "fixed ratio must lie in [0, 1]");
        }
        if (!(mix_lo < mix_hi)) {
            throw Error(ErrorCode::InvalidArgument, "mix_lo must be below mix_hi");
        }
        if (!(budget_adapt_fraction >= 0.0 && budget_adapt_fraction <= 0.2)) {
            throw Error(ErrorCode::InvalidArgument, "budget adapt fraction must lie in [0, 0.2]");
        }
        for (const auto& avg : {erank_avg, entropy_avg}) {
            if (avg && !(*avg > 0.0 && std::isfinite(*avg))) {
                throw Error(ErrorCode::NonPositiveAverage, "corpus averages must be positive");
            }
        }
    }
};

struct SelectionDiagnostics {
    std::optional<double> erank_retained;
    std::optional<double> entropy_input;
    std::optional<double> erank_input;
    std::vector<double> thresholds_applied;
    std::size_t refilled = 0;
    std::optional<double> mix_ratio;
    std::optional<std::size_t> budget_used;
};

struct SelectionResult {
    std::vector<std::size_t> indices;          // ascending encoder order
    std::vector<std::size_t> selection_order;  // order in which tokens were picked
    std::size_t k_effective = 0;
    SelectionDiagnostics diagnostics;

    static SelectionResult from_order(std::vector<std::size_t> order) {
        SelectionResult result;
        result.indices = order;
        std::sort(result.indices.begin(), result.indices.end());
        result.selection_order = std::move(order);
        result.k_effective = result.indices.size();
        return result;
    }
};

/// Half-away-from-zero rounding to a count.
inline std::size_t round_count(double x) {
    return x <= 0.0 ? 0 : static_cast<std::size_t>(std::llround(x));
}

}  // namespace tokenprune
