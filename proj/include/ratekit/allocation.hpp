#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ratekit/errors.hpp"
#include "ratekit/principles.hpp"

namespace ratekit {

struct AllocationResult {
    Principle principle = Principle::EVPP;
    double parameter = 0.0;  // phi, or tau for TSQPP
    double achieved_total = 0.0;
    double target_total = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool negative_parameter = false;
    long monotonicity_violations = 0;  // TSQPP refit totals out of order in tau
};

/// Closed-form loading parameter for principles affine in phi:
/// sum(pure) + phi * sum(base) = C.
inline AllocationResult solve_loading_linear(Principle principle, std::span<const double> pure,
                                             std::span<const double> loading_base, double C) {
    if (pure.size() != loading_base.size())
        throw LayoutError("solve_loading_linear: input lengths differ");
    double pure_total = 0.0, base_total = 0.0;
    for (double v : pure) pure_total += v;
    for (double v : loading_base) base_total += v;
    if (base_total == 0.0)
        throw DomainError("solve_loading_linear: loading base sums to zero");

    AllocationResult res;
    res.principle = principle;
    res.parameter = (C - pure_total) / base_total;
    res.target_total = C;
    res.achieved_total = pure_total + res.parameter * base_total;
    res.residual = res.achieved_total - C;
    res.negative_parameter = res.parameter < 0.0;
    return res;
}

/// Loading level tau for the two-stage quantile principle by bisection on
/// g(tau) = sum (1-p_i) Q_i(tau) - C. The quantile model is refit per
/// iterate; refits are cached on tau rounded to 1e-6. Totals are expected
/// nondecreasing in tau; inversions caused by refitting are counted while
/// bisection proceeds on the bracketing invariant.
inline AllocationResult solve_tau_tsqpp(
    std::span<const double> no_claim_probs,
    const std::function<std::vector<double>(double)>& refit, double C,
    std::pair<double, double> bracket = {0.01, 0.99}, double rel_tol = 1e-6,
    int max_iter = 60) {
    if (!(bracket.first < bracket.second))
        throw ValidationError("solve_tau_tsqpp: invalid bracket");
    if (!(C > 0.0)) throw ValidationError("solve_tau_tsqpp: target must be positive");

    std::map<long long, std::vector<double>> cache;
    std::map<double, double> evaluated;  // tau -> total, for inversion counting
    long inversions = 0;

    auto total_at = [&](double tau) {
        const long long key = std::llround(tau * 1e6);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, refit(tau)).first;
        const auto& quantiles = it->second;
        if (quantiles.size() != no_claim_probs.size())
            throw LayoutError("solve_tau_tsqpp: refit returned wrong number of quantiles");
        double total = 0.0;
        for (std::size_t i = 0; i < quantiles.size(); ++i)
            total += (1.0 - no_claim_probs[i]) * quantiles[i];

        auto pos = evaluated.emplace(tau, total).first;
        if (pos != evaluated.begin() && std::prev(pos)->second > total + 1e-9 * C)
            ++inversions;
        if (std::next(pos) != evaluated.end() && std::next(pos)->second + 1e-9 * C < total)
            ++inversions;
        return total;
    };

    double lo = bracket.first, hi = bracket.second;
    const double g_lo = total_at(lo) - C;
    const double g_hi = total_at(hi) - C;
    if (g_lo > 0.0 || g_hi < 0.0)
        throw BracketError("solve_tau_tsqpp: totals at bracket (" + std::to_string(g_lo + C) +
                           ", " + std::to_string(g_hi + C) + ") do not straddle target " +
                           std::to_string(C));

    AllocationResult res;
    res.principle = Principle::TSQPP;
    res.target_total = C;

    double tau = 0.5 * (lo + hi);
    double g_mid = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        tau = 0.5 * (lo + hi);
        g_mid = total_at(tau) - C;
        res.iterations = it;
        if (std::fabs(g_mid) <= rel_tol * C) break;
        if (g_mid < 0.0) lo = tau;
        else hi = tau;
    }

    res.parameter = tau;
    res.achieved_total = g_mid + C;
    res.residual = g_mid;
    res.monotonicity_violations = inversions;
    return res;
}

} // namespace ratekit
