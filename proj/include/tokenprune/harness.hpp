// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tokenprune/complexity.hpp"
#include "tokenprune/core.hpp"
#include "tokenprune/parallel.hpp"
#include "tokenprune/selectors.hpp"

namespace tokenprune::harness {

enum class Population { simple, complex };

inline std::string_view to_string(Population p) {
    return p == Population::simple ? "simple" : "complex";
}

inline Population parse_population(std::string_view name) {
    if (name == "simple") {
        return Population::simple;
    }
    if (name == "complex") {
        return Population::complex;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown population '" + std::string(name) + "'");
}

/// Gaussian clusters around random unit-norm centers. The first
/// `n_dominant` clusters are salient: they hold `dominant_fraction` of the
/// tokens and attention is a softmax over -peakedness * (distance to the
/// nearest salient center).
struct SyntheticSpec {
    Population population = Population::complex;
    std::size_t n_tokens = 576;
    std::size_t dim = 128;
    std::size_t n_clusters = 64;
    std::size_t n_dominant = 8;
    double dominant_fraction = 0.5;
    double cluster_spread = 0.03;
    double attention_peakedness = 4.0;
    std::uint64_t seed = 0;
};

/// Frozen population defaults. Calibrated so that simple and complex mean
/// erank differ by well over 3 population standard deviations, simple
/// attention entropy is lower, and the tau sweep on complex inputs rises.
inline SyntheticSpec default_spec(Population population, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.population = population;
    spec.seed = seed;
    if (population == Population::simple) {
        spec.n_clusters = 2;
        spec.n_dominant = 1;
        spec.dominant_fraction = 0.1;
        spec.cluster_spread = 0.02;
        spec.attention_peakedness = 12.0;
    }
    return spec;
}

inline Sample generate(const SyntheticSpec& spec) {
    if (spec.n_tokens == 0 || spec.dim == 0 || spec.n_clusters == 0) {
        throw Error(ErrorCode::InvalidArgument, "synthetic spec needs tokens, dimensions and clusters");
    }
    if (spec.n_dominant < 1 || spec.n_dominant > spec.n_clusters) {
        throw Error(ErrorCode::InvalidArgument, "n_dominant must lie in [1, n_clusters]");
    }
    if (!(spec.dominant_fraction > 0.0 && spec.dominant_fraction <= 1.0) || spec.cluster_spread < 0.0 ||
        spec.attention_peakedness < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "invalid synthetic spread, fraction or peakedness");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<double>> centers(spec.n_clusters, std::vector<double>(spec.dim));
    for (auto& c : centers) {
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (auto& v : c) {
                v = gauss(rng);
                norm += v * v;
            }
            norm = std::sqrt(norm);
        }
        for (auto& v : c) {
            v /= norm;
        }
    }

    const std::size_t n_background = spec.n_clusters - spec.n_dominant;
    std::vector<double> values(spec.n_tokens * spec.dim);
    std::vector<double> logits(spec.n_tokens);
    for (std::size_t i = 0; i < spec.n_tokens; ++i) {
        std::size_t cluster = 0;
        if (n_background == 0 || unit(rng) < spec.dominant_fraction) {
            cluster = static_cast<std::size_t>(unit(rng) * static_cast<double>(spec.n_dominant));
            cluster = std::min(cluster, spec.n_dominant - 1);
        } else {
            cluster = spec.n_dominant + std::min(n_background - 1, static_cast<std::size_t>(
                                                                       unit(rng) * static_cast<double>(n_background)));
        }
        // Per-token radius so tokens inside a cluster are not all equidistant.
        const double radius = spec.cluster_spread * (0.5 + unit(rng));
        double* row = values.data() + i * spec.dim;
        for (std::size_t j = 0; j < spec.dim; ++j) {
            row[j] = centers[cluster][j] + radius * gauss(rng);
        }
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < spec.n_dominant; ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < spec.dim; ++j) {
                const double diff = row[j] - centers[c][j];
                d2 += diff * diff;
            }
            nearest = std::min(nearest, std::sqrt(d2));
        }
        logits[i] = -spec.attention_peakedness * nearest;
    }

    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    std::vector<double> scores(spec.n_tokens);
    for (std::size_t i = 0; i < spec.n_tokens; ++i) {
        scores[i] = std::exp(logits[i] - top);
        total += scores[i];
    }
    for (auto& s : scores) {
        s /= total;
    }
    return {TokenMatrix(spec.n_tokens, spec.dim, std::move(values)), AttentionVector(std::move(scores))};
}

inline std::vector<Sample> generate_corpus(Population population, std::size_t count, std::uint64_t first_seed = 0) {
    std::vector<Sample> corpus;
    corpus.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        corpus.push_back(generate(default_spec(population, first_seed + i)));
    }
    return corpus;
}

/// Singular values by one-sided Jacobi rotations in extended precision.
/// Slow (intended for N, d <= 64) and independent of the library's SVD
/// and eigen-solver paths.
inline std::vector<long double> jacobi_singular_values(const TokenMatrix& matrix) {
    // Orthogonalize the columns of the tall orientation.
    const bool transpose = matrix.cols() > matrix.rows();
    const std::size_t m = transpose ? matrix.cols() : matrix.rows();
    const std::size_t n = transpose ? matrix.rows() : matrix.cols();
    std::vector<std::vector<long double>> cols(n, std::vector<long double>(m));
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            if (transpose) {
                cols[i][j] = matrix(i, j);
            } else {
                cols[j][i] = matrix(i, j);
            }
        }
    }
    auto dot = [m](const std::vector<long double>& a, const std::vector<long double>& b) {
        long double s = 0.0L;
        for (std::size_t k = 0; k < m; ++k) {
            s += a[k] * b[k];
        }
        return s;
    };
    constexpr long double tol = 1e-17L;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const long double alpha = dot(cols[p], cols[p]);
                const long double beta = dot(cols[q], cols[q]);
                const long double gamma = dot(cols[p], cols[q]);
                if (gamma == 0.0L || std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) {
                    continue;
                }
                rotated = true;
                const long double zeta = (beta - alpha) / (2.0L * gamma);
                const long double t =
                    (zeta >= 0.0L ? 1.0L : -1.0L) / (std::fabs(zeta) + std::sqrt(1.0L + zeta * zeta));
                const long double c = 1.0L / std::sqrt(1.0L + t * t);
                const long double s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const long double a = cols[p][k];
                    const long double b = cols[q][k];
                    cols[p][k] = c * a - s * b;
                    cols[q][k] = s * a + c * b;
                }
            }
        }
        if (!rotated) {
            break;
        }
    }
    std::vector<long double> sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        sv[j] = std::sqrt(dot(cols[j], cols[j]));
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

/// Reference erank: full extended-precision spectrum, no small-value floor.
inline double oracle_erank(const TokenMatrix& matrix) {
    const auto sv = jacobi_singular_values(matrix);
    long double total = 0.0L;
    for (auto s : sv) {
        total += s;
    }
    if (!(total > 0.0L)) {
        throw Error(ErrorCode::ZeroMatrix, "all singular values are zero");
    }
    long double entropy = 0.0L;
    for (auto s : sv) {
        if (s > 0.0L) {
            const long double q = s / total;
            entropy -= q * std::log(q);
        }
    }
    return static_cast<double>(std::exp(entropy));
}

struct FpsCheck {
    bool pass = true;
    std::optional<std::size_t> failed_step;
    std::string message;
};

/// Replays farthest point sampling against a claimed selection order and
/// reports the first step whose pick is not a maximizer of the distance
/// to the nearest already-selected point (ties must go to the lower index).
inline FpsCheck oracle_fps_check(const TokenMatrix& matrix, std::span<const std::size_t> selection_order,
                                 std::size_t start) {
    const std::size_t n = matrix.rows();
    auto fail = [](std::size_t step, std::string why) { return FpsCheck{false, step, std::move(why)}; };
    if (selection_order.empty()) {
        return fail(0, "empty selection");
    }
    if (selection_order[0] != start) {
        return fail(0, "selection does not begin at the start index");
    }
    auto distance = [&](std::size_t a, std::size_t b) {
        long double s = 0.0L;
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            const long double diff = static_cast<long double>(matrix(a, j)) - matrix(b, j);
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    constexpr long double rel_tol = 1e-12L;
    std::vector<bool> in_set(n, false);
    in_set[start] = true;
    for (std::size_t step = 1; step < selection_order.size(); ++step) {
        const std::size_t claimed = selection_order[step];
        if (claimed >= n || in_set[claimed]) {
            return fail(step, "index out of range or selected twice");
        }
        std::vector<long double> nearest(n, 0.0L);
        long double best = -1.0L;
        for (std::size_t j = 0; j < n; ++j) {
            if (in_set[j]) {
                continue;
            }
            long double d = std::numeric_limits<long double>::infinity();
            for (std::size_t s = 0; s < n; ++s) {
                if (in_set[s]) {
                    d = std::min(d, distance(j, s));
                }
            }
            nearest[j] = d;
            best = std::max(best, d);
        }
        const long double slack = rel_tol * best;
        if (nearest[claimed] < best - slack) {
            return fail(step, "token " + std::to_string(claimed) + " is not a farthest point");
        }
        for (std::size_t j = 0; j < claimed; ++j) {
            if (!in_set[j] && nearest[j] >= best - slack) {
                return fail(step, "tie should have gone to lower index " + std::to_string(j));
            }
        }
        in_set[claimed] = true;
    }
    return {};
}

struct SweepRow {
    double tau_scale = 0.0;
    double mean_erank_retained = 0.0;
    double mean_refilled = 0.0;
};

/// Prunes every sample with the adaptive threshold selector at each grid
/// value of tau_scale and averages the diagnostics. `base` supplies tau_max
/// and the corpus reference averages.
inline std::vector<SweepRow> run_tau_sweep(std::span<const Sample> corpus, std::size_t budget,
                                           std::span<const double> grid, PruneConfig base,
                                           std::size_t threads = 1) {
    if (corpus.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "sweep corpus is empty");
    }
    if (grid.empty()) {
        throw Error(ErrorCode::InvalidArgument, "sweep grid is empty");
    }
    base.method = Method::adaptive_threshold;
    base.budget = budget;
    base.budget_adapt_fraction = 0.0;
    std::vector<SweepRow> rows;
    for (double tau_scale : grid) {
        PruneConfig config = base;
        config.tau_scale = tau_scale;
        config.validate();
        std::vector<double> eranks(corpus.size(), 0.0);
        std::vector<std::size_t> refilled(corpus.size(), 0);
        parallel_for(corpus.size(), threads, [&](std::size_t i) {
            const auto outcome = prune(corpus[i].first, corpus[i].second, config);
            eranks[i] = outcome.selection.diagnostics.erank_retained.value_or(0.0);
            refilled[i] = outcome.selection.diagnostics.refilled;
        });
        SweepRow row{tau_scale, 0.0, 0.0};
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            row.mean_erank_retained += eranks[i];
            row.mean_refilled += static_cast<double>(refilled[i]);
        }
        row.mean_erank_retained /= static_cast<double>(corpus.size());
        row.mean_refilled /= static_cast<double>(corpus.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tokenprune::harness
