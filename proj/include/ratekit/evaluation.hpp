#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ratekit/errors.hpp"
#include "ratekit/rng.hpp"

namespace ratekit {

/// Ordered Lorenz curve: both coordinates run from 0 to 1 and are
/// nondecreasing; policies are ordered by relative premium.
struct LorenzCurve {
    std::vector<double> premium_share;
    std::vector<double> loss_share;
};

/// Sorts policies by competing/base premium ascending (ties keep input
/// order and collapse into one curve segment) and accumulates base-premium
/// and loss shares. Tie grouping makes the curve of a model against itself
/// exactly the diagonal.
inline LorenzCurve ordered_lorenz(std::span<const double> losses,
                                  std::span<const double> base_premiums,
                                  std::span<const double> competing_premiums) {
    const std::size_t n = losses.size();
    if (n < 2 || base_premiums.size() != n || competing_premiums.size() != n)
        throw ValidationError("ordered_lorenz: need equal-length inputs of size >= 2");
    std::string offenders;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(base_premiums[i] > 0.0)) {
            if (!offenders.empty()) offenders += ", ";
            if (offenders.size() < 60) offenders += std::to_string(i);
        }
    }
    if (!offenders.empty())
        throw DomainError("ordered_lorenz: non-positive base premium at indices " + offenders);

    double loss_total = 0.0, premium_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        loss_total += losses[i];
        premium_total += base_premiums[i];
    }
    if (loss_total <= 0.0) throw DomainError("ordered_lorenz: losses sum to zero");

    std::vector<double> relative(n);
    for (std::size_t i = 0; i < n; ++i)
        relative[i] = competing_premiums[i] / base_premiums[i];
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return relative[a] < relative[b];
    });

    LorenzCurve curve;
    curve.premium_share.reserve(n + 1);
    curve.loss_share.reserve(n + 1);
    curve.premium_share.push_back(0.0);
    curve.loss_share.push_back(0.0);
    double cum_premium = 0.0, cum_loss = 0.0;
    for (std::size_t k = 0; k < n;) {
        const double r = relative[order[k]];
        while (k < n && relative[order[k]] == r) {
            cum_premium += base_premiums[order[k]];
            cum_loss += losses[order[k]];
            ++k;
        }
        curve.premium_share.push_back(cum_premium / premium_total);
        curve.loss_share.push_back(cum_loss / loss_total);
    }
    curve.premium_share.back() = 1.0;
    curve.loss_share.back() = 1.0;
    return curve;
}

/// Gini index in percent: 100 * 2 * (area under the diagonal minus area
/// under the curve), trapezoidal. Positive when the curve sags below the
/// diagonal, i.e. the competing premium separates risks better.
inline double gini_index(const LorenzCurve& curve) {
    const std::size_t n = curve.premium_share.size();
    if (n < 2 || curve.loss_share.size() != n)
        throw ValidationError("gini_index: malformed curve");
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        area += (curve.premium_share[i + 1] - curve.premium_share[i]) *
                (curve.loss_share[i] + curve.loss_share[i + 1]) * 0.5;
    return 100.0 * (1.0 - 2.0 * area);
}

/// Pairwise Gini comparison over random data splits with the mini-max
/// selection rule.
struct GiniMatrix {
    std::vector<std::string> model_names;
    std::vector<std::vector<double>> mean;  // [base][competing], percent
    std::vector<std::vector<double>> se;    // standard error over splits
    std::vector<double> row_max;            // per base, including the zero diagonal
    std::size_t winner = 0;                 // argmin of row_max
    bool tie = false;
    long resampled_splits = 0;
    int n_splits = 0;
};

struct NamedPremiums {
    std::string name;
    std::vector<double> premiums;
};

inline GiniMatrix gini_matrix(const std::vector<NamedPremiums>& models,
                              std::span<const double> losses, int n_splits = 20,
                              double split_fraction = 0.5, std::uint64_t rng_seed = 1,
                              bool full_sample = false) {
    if (models.size() < 2) throw ValidationError("gini_matrix: need at least two models");
    if (n_splits < 1) throw ValidationError("gini_matrix: need at least one split");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw ValidationError("gini_matrix: split fraction outside (0,1)");
    const std::size_t n = losses.size();
    for (const auto& m : models) {
        if (m.premiums.size() != n)
            throw LayoutError("gini_matrix: model '" + m.name + "' has wrong length");
        for (std::size_t i = 0; i < n; ++i)
            if (!(m.premiums[i] > 0.0))
                throw DomainError("gini_matrix: model '" + m.name +
                                  "' has non-positive premium at index " + std::to_string(i) +
                                  "; filter infeasible policies upstream");
    }

    const std::size_t m_count = models.size();
    GiniMatrix out;
    out.n_splits = n_splits;
    for (const auto& m : models) out.model_names.push_back(m.name);
    out.mean.assign(m_count, std::vector<double>(m_count, 0.0));
    out.se.assign(m_count, std::vector<double>(m_count, 0.0));

    std::vector<std::vector<std::vector<double>>> per_split(
        static_cast<std::size_t>(n_splits),
        std::vector<std::vector<double>>(m_count, std::vector<double>(m_count, 0.0)));

    const std::size_t sample_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(split_fraction *
                                                          static_cast<double>(n)));
    std::vector<std::uint32_t> idx(n);
    std::vector<char> in_sample(n);

    for (int g = 0; g < n_splits; ++g) {
        std::vector<std::size_t> eval;
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 10)
                throw DomainError("gini_matrix: split " + std::to_string(g) +
                                  " degenerate after 10 resamples (all-zero losses)");
            eval.clear();
            if (full_sample) {
                for (std::size_t i = 0; i < n; ++i) eval.push_back(i);
            } else {
                RngStream rng = RngStream::keyed(rng_seed, static_cast<std::uint64_t>(g),
                                                 static_cast<std::uint64_t>(attempt));
                for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
                for (std::size_t i = 0; i < sample_size; ++i) {
                    const std::size_t j =
                        i + rng.next_below(static_cast<std::uint32_t>(n - i));
                    std::swap(idx[i], idx[j]);
                }
                std::fill(in_sample.begin(), in_sample.end(), 0);
                for (std::size_t i = 0; i < sample_size; ++i) in_sample[idx[i]] = 1;
                for (std::size_t i = 0; i < n; ++i)
                    if (!in_sample[i]) eval.push_back(i);  // held-out part
            }
            double loss_sum = 0.0;
            for (std::size_t i : eval) loss_sum += losses[i];
            if (loss_sum > 0.0 && eval.size() >= 2) break;
            ++out.resampled_splits;
            if (full_sample)
                throw DomainError("gini_matrix: all losses are zero");
        }

        std::vector<double> eval_losses(eval.size());
        for (std::size_t i = 0; i < eval.size(); ++i) eval_losses[i] = losses[eval[i]];
        std::vector<std::vector<double>> eval_premiums(m_count,
                                                       std::vector<double>(eval.size()));
        for (std::size_t m = 0; m < m_count; ++m)
            for (std::size_t i = 0; i < eval.size(); ++i)
                eval_premiums[m][i] = models[m].premiums[eval[i]];

        for (std::size_t b = 0; b < m_count; ++b)
            for (std::size_t c = 0; c < m_count; ++c)
                per_split[static_cast<std::size_t>(g)][b][c] =
                    (b == c) ? 0.0
                             : gini_index(ordered_lorenz(eval_losses, eval_premiums[b],
                                                         eval_premiums[c]));
    }

    for (std::size_t b = 0; b < m_count; ++b) {
        for (std::size_t c = 0; c < m_count; ++c) {
            double mean = 0.0;
            for (int g = 0; g < n_splits; ++g)
                mean += per_split[static_cast<std::size_t>(g)][b][c];
            mean /= static_cast<double>(n_splits);
            double ss = 0.0;
            for (int g = 0; g < n_splits; ++g) {
                const double d = per_split[static_cast<std::size_t>(g)][b][c] - mean;
                ss += d * d;
            }
            out.mean[b][c] = mean;
            out.se[b][c] = n_splits > 1
                               ? std::sqrt(ss / static_cast<double>(n_splits - 1)) /
                                     std::sqrt(static_cast<double>(n_splits))
                               : 0.0;
        }
    }

    out.row_max.resize(m_count);
    for (std::size_t b = 0; b < m_count; ++b)
        out.row_max[b] = *std::max_element(out.mean[b].begin(), out.mean[b].end());
    out.winner = 0;
    for (std::size_t b = 1; b < m_count; ++b)
        if (out.row_max[b] < out.row_max[out.winner]) out.winner = b;
    for (std::size_t b = 0; b < m_count; ++b)
        if (b != out.winner && out.row_max[b] == out.row_max[out.winner]) out.tie = true;
    return out;
}

/// Per-class bias / MSE / sample variance over replicates. Variance uses
/// the decomposition MSE - Bias^2.
struct ClassMetrics {
    std::vector<std::string> class_labels;
    std::vector<double> bias;
    std::vector<double> mse;
    std::vector<double> variance;
};

inline ClassMetrics class_metrics(const std::vector<std::vector<double>>& true_by_replicate,
                                  const std::vector<std::vector<double>>& pred_by_replicate,
                                  const std::vector<std::string>& class_labels) {
    const std::size_t T = true_by_replicate.size();
    if (T == 0 || pred_by_replicate.size() != T)
        throw LayoutError("class_metrics: replicate counts differ or are empty");
    const std::size_t S = class_labels.size();
    for (std::size_t t = 0; t < T; ++t)
        if (true_by_replicate[t].size() != S || pred_by_replicate[t].size() != S)
            throw LayoutError("class_metrics: class lists misaligned at replicate " +
                              std::to_string(t));

    ClassMetrics out;
    out.class_labels = class_labels;
    out.bias.assign(S, 0.0);
    out.mse.assign(S, 0.0);
    out.variance.assign(S, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            const double err = true_by_replicate[t][s] - pred_by_replicate[t][s];
            out.bias[s] += err;
            out.mse[s] += err * err;
        }
    }
    for (std::size_t s = 0; s < S; ++s) {
        out.bias[s] /= static_cast<double>(T);
        out.mse[s] /= static_cast<double>(T);
        out.variance[s] = out.mse[s] - out.bias[s] * out.bias[s];
    }
    return out;
}

} // namespace ratekit
