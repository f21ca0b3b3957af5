// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tokenprune/complexity.hpp"
#include "tokenprune/core.hpp"

namespace tokenprune {

/// All token indices ordered by descending attention, ties by lower index.
inline std::vector<std::size_t> attention_ranking(const AttentionVector& attn) {
    std::vector<std::size_t> order(attn.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto scores = attn.scores();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

inline SelectionResult select_topk_attention(const AttentionVector& attn, std::size_t budget) {
    if (budget < 1) {
        throw Error(ErrorCode::InvalidArgument, "budget must be at least 1");
    }
    auto order = attention_ranking(attn);
    order.resize(std::min(budget, order.size()));
    return SelectionResult::from_order(std::move(order));
}

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        sum += diff * diff;
    }
    return sum;
}

/// Continues farthest point sampling from an already-selected seed set
/// until `target` tokens are chosen. Each step picks the unselected token
/// whose distance to its nearest selected token is largest, lowest index
/// on ties.
inline std::vector<std::size_t> fps_extend(const TokenMatrix& matrix, std::vector<std::size_t> selected,
                                           std::size_t target) {
    const std::size_t n = matrix.rows();
    target = std::min(target, n);
    std::vector<bool> taken(n, false);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    auto absorb = [&](std::size_t s) {
        taken[s] = true;
        const auto srow = matrix.row(s);
        for (std::size_t j = 0; j < n; ++j) {
            if (!taken[j]) {
                nearest[j] = std::min(nearest[j], squared_distance(matrix.row(j), srow));
            }
        }
    };
    for (std::size_t s : selected) {
        absorb(s);
    }
    while (selected.size() < target) {
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (!taken[j] && (best == n || nearest[j] > nearest[best])) {
                best = j;
            }
        }
        selected.push_back(best);
        absorb(best);
    }
    return selected;
}

}  // namespace detail

/// Farthest point sampling under Euclidean distance on the raw rows,
/// seeded at `start` (index 0 when not given).
inline SelectionResult select_fps(const TokenMatrix& matrix, std::size_t budget,
                                  std::optional<std::size_t> start = std::nullopt) {
    if (budget < 1) {
        throw Error(ErrorCode::InvalidArgument, "budget must be at least 1");
    }
    const std::size_t seed = start.value_or(0);
    if (seed >= matrix.rows()) {
        throw Error(ErrorCode::StartOutOfRange,
                    "start index " + std::to_string(seed) + " >= " + std::to_string(matrix.rows()));
    }
    return SelectionResult::from_order(detail::fps_extend(matrix, {seed}, budget));
}

/// FPS seeded at the highest-attention token.
inline SelectionResult select_fps(const TokenMatrix& matrix, const AttentionVector& attn, std::size_t budget) {
    validate_pair(matrix, attn);
    return select_fps(matrix, budget, attention_ranking(attn).front());
}

/// round(R * K) tokens by attention, the rest by FPS over the remaining
/// pool. FPS continues from the attention set, so its first pick is the
/// token farthest from it; with no attention tokens it starts at the
/// max-attention token.
inline SelectionResult select_hybrid_fixed(const TokenMatrix& matrix, const AttentionVector& attn,
                                           std::size_t budget, double ratio) {
    validate_pair(matrix, attn);
    if (budget < 1) {
        throw Error(ErrorCode::InvalidArgument, "budget must be at least 1");
    }
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "ratio must lie in [0, 1]");
    }
    const std::size_t k_eff = std::min(budget, matrix.rows());
    const std::size_t k_att = std::min(k_eff, round_count(ratio * static_cast<double>(k_eff)));
    auto ranking = attention_ranking(attn);
    std::vector<std::size_t> seed;
    if (k_att == 0) {
        seed.push_back(ranking.front());
    } else {
        seed.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k_att));
    }
    auto result = SelectionResult::from_order(detail::fps_extend(matrix, std::move(seed), k_eff));
    result.diagnostics.mix_ratio = ratio;
    return result;
}

/// Linear map from input complexity to the attention share of the budget:
/// 1 at or below mix_lo, 0 at or above mix_hi.
inline double adaptive_mix_ratio(double complexity, double mix_lo, double mix_hi) {
    if (!(mix_lo < mix_hi)) {
        throw Error(ErrorCode::InvalidArgument, "mix_lo must be below mix_hi");
    }
    return std::clamp((mix_hi - complexity) / (mix_hi - mix_lo), 0.0, 1.0);
}

struct ComplexitySignalValue {
    double input = 0.0;
    std::optional<double> average;
};

inline ComplexitySignalValue complexity_signal(const TokenMatrix& matrix, const AttentionVector& attn,
                                               const PruneConfig& config) {
    if (config.complexity_signal == ComplexitySignal::attention_entropy) {
        return {attention_entropy(attn), config.entropy_avg};
    }
    return {erank(matrix), config.erank_avg};
}

inline SelectionResult select_hybrid_adaptive(const TokenMatrix& matrix, const AttentionVector& attn,
                                              std::size_t budget, const PruneConfig& config) {
    validate_pair(matrix, attn);
    const auto signal = complexity_signal(matrix, attn, config);
    auto result = select_hybrid_fixed(matrix, attn, budget,
                                      adaptive_mix_ratio(signal.input, config.mix_lo, config.mix_hi));
    if (config.complexity_signal == ComplexitySignal::erank) {
        result.diagnostics.erank_input = signal.input;
    } else {
        result.diagnostics.entropy_input = signal.input;
    }
    return result;
}

/// Cosine-distance threshold for the order-th selection:
/// min(order * (input / average * scale), cap).
inline double dynamic_tau(std::size_t order, double complexity_input, double complexity_avg, double tau_scale,
                          double tau_max) {
    if (order < 1) {
        throw Error(ErrorCode::InvalidArgument, "order is 1-based");
    }
    if (!(complexity_avg > 0.0)) {
        throw Error(ErrorCode::NonPositiveAverage, "complexity average must be positive");
    }
    return std::min(static_cast<double>(order) * (complexity_input / complexity_avg * tau_scale), tau_max);
}

/// 1 - cos(u, v), clamped to [0, 2]. A zero-norm row is at distance 1 from
/// everything.
inline double cosine_distance(std::span<const double> u, std::span<const double> v, double norm_u,
                              double norm_v) {
    if (norm_u == 0.0 || norm_v == 0.0) {
        return 1.0;
    }
    double dot = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        dot += u[j] * v[j];
    }
    return std::clamp(1.0 - dot / (norm_u * norm_v), 0.0, 2.0);
}

struct ThresholdStep {
    std::size_t token_index = 0;
    std::size_t order = 0;  // 1-based
    double tau = 0.0;
    std::size_t pruned_count = 0;
};

struct ThresholdTrace {
    std::vector<ThresholdStep> steps;
    std::vector<std::size_t> refilled_indices;
};

/// Greedy attention-ordered selection with similarity pruning: take the
/// best unpruned token, drop every remaining candidate within cosine
/// distance tau_i of it, repeat. If candidates run out before the budget,
/// pruned tokens are re-admitted in attention order.
inline std::pair<SelectionResult, ThresholdTrace> select_adaptive_threshold(const TokenMatrix& matrix,
                                                                            const AttentionVector& attn,
                                                                            std::size_t budget,
                                                                            const PruneConfig& config) {
    validate_pair(matrix, attn);
    if (budget < 1) {
        throw Error(ErrorCode::InvalidArgument, "budget must be at least 1");
    }
    const auto signal = complexity_signal(matrix, attn, config);
    double average = 1.0;
    if (signal.average) {
        average = *signal.average;
    } else if (config.tau_scale != 0.0) {
        // tau is identically zero when tau_scale is 0, so the reference is only needed otherwise.
        throw Error(ErrorCode::MissingReference,
                    std::string("adaptive threshold needs a corpus average for signal '") +
                        std::string(to_string(config.complexity_signal)) + "'");
    }

    const std::size_t n = matrix.rows();
    const std::size_t k_eff = std::min(budget, n);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = matrix.row(i);
        norms[i] = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
    }

    const auto ranking = attention_ranking(attn);
    enum class State : unsigned char { candidate, selected, pruned };
    std::vector<State> state(n, State::candidate);
    std::vector<std::size_t> order;
    ThresholdTrace trace;

    for (std::size_t pos = 0; pos < n && order.size() < k_eff; ++pos) {
        const std::size_t token = ranking[pos];
        if (state[token] != State::candidate) {
            continue;
        }
        state[token] = State::selected;
        order.push_back(token);
        const double tau = dynamic_tau(order.size(), signal.input, average, config.tau_scale, config.tau_max);
        std::size_t pruned = 0;
        if (tau > 0.0) {
            for (std::size_t later = pos + 1; later < n; ++later) {
                const std::size_t other = ranking[later];
                if (state[other] == State::candidate &&
                    cosine_distance(matrix.row(token), matrix.row(other), norms[token], norms[other]) < tau) {
                    state[other] = State::pruned;
                    ++pruned;
                }
            }
        }
        trace.steps.push_back({token, order.size(), tau, pruned});
    }

    for (std::size_t pos = 0; pos < n && order.size() < k_eff; ++pos) {
        const std::size_t token = ranking[pos];
        if (state[token] == State::pruned) {
            state[token] = State::selected;
            order.push_back(token);
            trace.refilled_indices.push_back(token);
        }
    }

    auto result = SelectionResult::from_order(std::move(order));
    for (const auto& step : trace.steps) {
        result.diagnostics.thresholds_applied.push_back(step.tau);
    }
    result.diagnostics.refilled = trace.refilled_indices.size();
    if (config.complexity_signal == ComplexitySignal::erank) {
        result.diagnostics.erank_input = signal.input;
    } else {
        result.diagnostics.entropy_input = signal.input;
    }
    return {std::move(result), std::move(trace)};
}

/// Budget scaled by the complexity ratio, clamped to [1 - fraction, 1 + fraction].
inline std::size_t adaptive_budget(double complexity_input, double complexity_avg, std::size_t reference_budget,
                                   double fraction) {
    if (!(complexity_avg > 0.0)) {
        throw Error(ErrorCode::NonPositiveAverage, "complexity average must be positive");
    }
    if (!(fraction >= 0.0 && fraction <= 0.2)) {
        throw Error(ErrorCode::InvalidArgument, "budget fraction must lie in [0, 0.2]");
    }
    const double scale = std::clamp(complexity_input / complexity_avg, 1.0 - fraction, 1.0 + fraction);
    return std::max<std::size_t>(1, round_count(static_cast<double>(reference_budget) * scale));
}

struct PruneOutcome {
    SelectionResult selection;
    std::optional<ThresholdTrace> trace;
};

/// Runs the configured method and fills every diagnostic: input erank and
/// entropy, erank of the retained rows, and the budget actually used.
inline PruneOutcome prune(const TokenMatrix& matrix, const AttentionVector& attn, const PruneConfig& config) {
    config.validate();
    validate_pair(matrix, attn);

    const double erank_input = erank(matrix);
    const double entropy_input = attention_entropy(attn);
    std::size_t budget = config.budget;
    if (config.budget_adapt_fraction > 0.0) {
        const bool use_erank = config.complexity_signal == ComplexitySignal::erank;
        const auto& average = use_erank ? config.erank_avg : config.entropy_avg;
        if (!average) {
            throw Error(ErrorCode::MissingReference, "adaptive budget needs a corpus average");
        }
        budget = adaptive_budget(use_erank ? erank_input : entropy_input, *average, config.budget,
                                 config.budget_adapt_fraction);
    }

    PruneOutcome outcome;
    switch (config.method) {
    case Method::attention_topk:
        outcome.selection = select_topk_attention(attn, budget);
        break;
    case Method::fps:
        outcome.selection = config.fps_start ? select_fps(matrix, budget, config.fps_start)
                                             : select_fps(matrix, attn, budget);
        break;
    case Method::hybrid_fixed:
        outcome.selection = select_hybrid_fixed(matrix, attn, budget, config.fixed_ratio);
        break;
    case Method::hybrid_adaptive:
        outcome.selection = select_hybrid_adaptive(matrix, attn, budget, config);
        break;
    case Method::adaptive_threshold: {
        auto [selection, trace] = select_adaptive_threshold(matrix, attn, budget, config);
        outcome.selection = std::move(selection);
        outcome.trace = std::move(trace);
        break;
    }
    }

    auto& diag = outcome.selection.diagnostics;
    diag.erank_input = erank_input;
    diag.entropy_input = entropy_input;
    diag.budget_used = budget;
    try {
        diag.erank_retained = erank(matrix.select_rows(outcome.selection.indices));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroMatrix) {
            throw;
        }
        diag.erank_retained.reset();
    }
    return outcome;
}

}  // namespace tokenprune
