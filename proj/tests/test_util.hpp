// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tokenprune/core.hpp"

namespace tokenprune::fixtures {

inline TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    std::vector<double> values(rows * cols);
    for (auto& v : values) {
        v = gauss(rng);
    }
    return TokenMatrix(rows, cols, std::move(values));
}

inline AttentionVector random_attention(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> scores(n);
    for (auto& s : scores) {
        s = unit(rng) + 1e-9;
    }
    return AttentionVector(std::move(scores));
}

/// Attention with many exact ties: scores drawn from a handful of levels.
inline AttentionVector tied_attention(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> level(1, 3);
    std::vector<double> scores(n);
    for (auto& s : scores) {
        s = 0.25 * level(rng);
    }
    return AttentionVector(std::move(scores));
}

/// Matrix whose rows are drawn (with repetition) from a few distinct rows,
/// so cosine pruning removes many candidates and forces refill.
inline TokenMatrix duplicated_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                     std::size_t distinct) {
    const auto base = random_matrix(rng, distinct, cols);
    std::uniform_int_distribution<std::size_t> pick(0, distinct - 1);
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto r = base.row(pick(rng));
        values.insert(values.end(), r.begin(), r.end());
    }
    return TokenMatrix(rows, cols, std::move(values));
}

inline TokenMatrix scaled(const TokenMatrix& m, double c) {
    std::vector<double> values(m.values().begin(), m.values().end());
    for (auto& v : values) {
        v *= c;
    }
    return TokenMatrix(m.rows(), m.cols(), std::move(values));
}

/// U * diag(sigma) * V^T built from fixed Givens rotations, 3 x 4.
inline TokenMatrix rotated_diag_211() {
    const double c = std::cos(0.3), s = std::sin(0.3);
    const double c2 = std::cos(1.1), s2 = std::sin(1.1);
    const double u[3][3] = {{c, -s, 0}, {s, c, 0}, {0, 0, 1}};
    const double v[4][4] = {{c2, 0, -s2, 0}, {0, 1, 0, 0}, {s2, 0, c2, 0}, {0, 0, 0, 1}};
    const double sigma[3] = {2, 1, 1};
    std::vector<double> values(12, 0.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) {
                acc += u[i][k] * sigma[k] * v[j][k];
            }
            values[static_cast<std::size_t>(i * 4 + j)] = acc;
        }
    }
    return TokenMatrix(3, 4, std::move(values));
}

}  // namespace tokenprune::fixtures
