// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "tokenprune/core.hpp"
#include "tokenprune/parallel.hpp"

namespace tokenprune {

namespace detail {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajorMatrix> as_eigen(const TokenMatrix& m) {
    return {m.values().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kSpectrumFloor = 1e-12;

/// exp of the Shannon entropy of the normalized spectrum.
inline double spectral_erank(std::span<const double> singular_values) {
    double sigma_max = 0.0;
    for (double s : singular_values) {
        sigma_max = std::max(sigma_max, s);
    }
    if (!(sigma_max > 0.0)) {
        throw Error(ErrorCode::ZeroMatrix, "all singular values are zero; erank is undefined");
    }
    const double floor = kSpectrumFloor * sigma_max;
    long double total = 0.0L;
    for (double s : singular_values) {
        if (s > floor) {
            total += s;
        }
    }
    long double entropy = 0.0L;
    for (double s : singular_values) {
        if (s > floor) {
            const long double q = s / total;
            entropy -= q * std::log(q);
        }
    }
    return static_cast<double>(std::exp(entropy));
}

}  // namespace detail

/// Shannon entropy (natural log) of the renormalized attention scores.
inline double attention_entropy(std::span<const double> scores) {
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyInput, "attention vector is empty");
    }
    long double total = 0.0L;
    for (double s : scores) {
        if (!std::isfinite(s) || s < 0.0) {
            throw Error(ErrorCode::InvalidValue, "attention scores must be finite and non-negative");
        }
        total += s;
    }
    if (total <= 0.0L) {
        throw Error(ErrorCode::ZeroMass, "attention scores sum to zero");
    }
    long double entropy = 0.0L;
    for (double s : scores) {
        if (s > 0.0) {
            const long double p = s / total;
            entropy -= p * std::log(p);
        }
    }
    return static_cast<double>(std::max(entropy, 0.0L));
}

inline double attention_entropy(const AttentionVector& attn) {
    return attention_entropy(attn.scores());
}

/// Effective rank from a full singular value decomposition.
inline double erank_svd(const TokenMatrix& matrix) {
    Eigen::BDCSVD<detail::RowMajorMatrix> svd(detail::as_eigen(matrix));
    const auto& sv = svd.singularValues();
    return detail::spectral_erank(std::span<const double>(sv.data(), static_cast<std::size_t>(sv.size())));
}

/// Effective rank from the eigenvalues of the Gram matrix. The Gram matrix
/// is built on the smaller side (X X^T when N <= d, X^T X otherwise); both
/// share the nonzero spectrum sigma_i^2.
inline double erank_fast(const TokenMatrix& matrix) {
    const auto x = detail::as_eigen(matrix);
    Eigen::MatrixXd gram = matrix.rows() <= matrix.cols() ? Eigen::MatrixXd(x * x.transpose())
                                                          : Eigen::MatrixXd(x.transpose() * x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& lambda = solver.eigenvalues();
    const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
    // Eigenvalues inside the solver's rounding band around zero (including
    // negative ones) carry no signal; sqrt would lift them to ~1e-8 sigma_max.
    const double noise = static_cast<double>(gram.rows()) * std::numeric_limits<double>::epsilon() * lambda_max;
    std::vector<double> sigma(static_cast<std::size_t>(lambda.size()));
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        sigma[static_cast<std::size_t>(i)] = lambda[i] > noise ? std::sqrt(lambda[i]) : 0.0;
    }
    return detail::spectral_erank(sigma);
}

/// Default erank path: Gram eigenvalues when N <= d, full SVD otherwise.
inline double erank(const TokenMatrix& matrix) {
    return matrix.rows() <= matrix.cols() ? erank_fast(matrix) : erank_svd(matrix);
}

inline ComplexityProfile complexity_profile(const TokenMatrix& matrix, const AttentionVector& attn) {
    validate_pair(matrix, attn);
    return {erank(matrix), attention_entropy(attn), matrix.rows()};
}

struct CorpusStats {
    double erank_mean = 0.0;
    double erank_q1 = 0.0;
    double erank_median = 0.0;
    double erank_q3 = 0.0;
    double entropy_mean = 0.0;
    double entropy_q1 = 0.0;
    double entropy_median = 0.0;
    double entropy_q3 = 0.0;
    std::size_t n_samples = 0;
};

/// Quantile by linear interpolation between order statistics, position
/// q * (n - 1) in the sorted sample.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "quantile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline CorpusStats summarize_profiles(std::span<const ComplexityProfile> profiles) {
    if (profiles.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "corpus has no samples");
    }
    std::vector<double> eranks;
    std::vector<double> entropies;
    for (const auto& p : profiles) {
        eranks.push_back(p.erank);
        entropies.push_back(p.attention_entropy);
    }
    auto mean = [](const std::vector<double>& v) {
        long double sum = 0.0L;
        for (double x : v) {
            sum += x;
        }
        return static_cast<double>(sum / static_cast<long double>(v.size()));
    };
    CorpusStats stats;
    stats.erank_mean = mean(eranks);
    stats.erank_q1 = quantile(eranks, 0.25);
    stats.erank_median = quantile(eranks, 0.5);
    stats.erank_q3 = quantile(eranks, 0.75);
    stats.entropy_mean = mean(entropies);
    stats.entropy_q1 = quantile(entropies, 0.25);
    stats.entropy_median = quantile(entropies, 0.5);
    stats.entropy_q3 = quantile(entropies, 0.75);
    stats.n_samples = profiles.size();
    return stats;
}

using Sample = std::pair<TokenMatrix, AttentionVector>;

/// Per-sample erank (Gram route) and attention entropy, aggregated into
/// means and quartiles. Samples are evaluated on up to `threads` workers;
/// aggregation order is fixed.
inline CorpusStats corpus_stats(std::span<const Sample> samples, std::size_t threads = 1) {
    if (samples.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "corpus has no samples");
    }
    std::vector<ComplexityProfile> profiles(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const auto& [matrix, attn] = samples[i];
        validate_pair(matrix, attn);
        profiles[i] = {erank_fast(matrix), attention_entropy(attn), matrix.rows()};
    });
    return summarize_profiles(profiles);
}

}  // namespace tokenprune
