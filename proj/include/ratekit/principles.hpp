#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ratekit/errors.hpp"
#include "ratekit/expectile.hpp"
#include "ratekit/rng.hpp"

namespace ratekit {

enum class Principle { EVPP, SDPP, QPP, TSQPP, EPP };

inline const char* principle_name(Principle p) {
    switch (p) {
        case Principle::EVPP: return "EVPP";
        case Principle::SDPP: return "SDPP";
        case Principle::QPP: return "QPP";
        case Principle::TSQPP: return "TSQPP";
        case Principle::EPP: return "EPP";
    }
    return "?";
}

/// One priced policy or tariff class. The risk premium always equals pure
/// premium plus risk loading; for TSQPP the loading is defined as that
/// difference and may be negative.
struct PremiumQuote {
    Principle principle = Principle::EVPP;
    double pure_premium = 0.0;
    double risk_loading = 0.0;
    double risk_premium = 0.0;
    double loading_parameter = 0.0;  // phi, or tau for TSQPP
    std::string label;
    bool parameter_warning = false;  // QPP loading parameter outside [0,1]
    bool negative_loading = false;   // observed for TSQPP
};

/// Expected value principle: H = (1 + phi) E.
inline PremiumQuote price_evpp(double pure, double phi, std::string label = {}) {
    if (!(phi >= 0.0)) throw ValidationError("price_evpp: phi must be non-negative");
    PremiumQuote q;
    q.principle = Principle::EVPP;
    q.pure_premium = pure;
    q.risk_premium = (1.0 + phi) * pure;
    q.risk_loading = q.risk_premium - pure;
    q.loading_parameter = phi;
    q.label = std::move(label);
    return q;
}

/// Standard deviation principle: H = E + phi * sqrt(Var).
inline PremiumQuote price_sdpp(double pure, double variance, double phi,
                               std::string label = {}) {
    if (!(phi >= 0.0)) throw ValidationError("price_sdpp: phi must be non-negative");
    if (!(variance >= 0.0)) throw ValidationError("price_sdpp: negative variance");
    PremiumQuote q;
    q.principle = Principle::SDPP;
    q.pure_premium = pure;
    q.risk_premium = pure + phi * std::sqrt(variance);
    q.risk_loading = q.risk_premium - pure;
    q.loading_parameter = phi;
    q.label = std::move(label);
    return q;
}

/// Quantile premium principle: H = E + phi (Q_tau - E). Parameters outside
/// [0,1] are permitted but flagged.
inline PremiumQuote price_qpp(double pure, double var_tau, double phi,
                              std::string label = {}) {
    PremiumQuote q;
    q.principle = Principle::QPP;
    q.pure_premium = pure;
    q.risk_premium = pure + phi * (var_tau - pure);
    q.risk_loading = q.risk_premium - pure;
    q.loading_parameter = phi;
    q.parameter_warning = !(phi >= 0.0 && phi <= 1.0);
    q.label = std::move(label);
    return q;
}

/// Two-stage quantile principle: H = (1 - p) Q_{Y*}(tau); the loading is the
/// difference to the pure premium and may come out negative.
inline PremiumQuote price_tsqpp(double no_claim_prob, double var_tau_positive, double pure,
                                double tau, std::string label = {}) {
    if (!(no_claim_prob > 0.0 && no_claim_prob <= 1.0))
        throw ValidationError("price_tsqpp: no-claim probability outside (0,1]");
    PremiumQuote q;
    q.principle = Principle::TSQPP;
    q.pure_premium = pure;
    q.risk_premium = (1.0 - no_claim_prob) * var_tau_positive;
    q.risk_loading = q.risk_premium - pure;
    q.loading_parameter = tau;
    q.negative_loading = q.risk_loading < 0.0;
    q.label = std::move(label);
    return q;
}

/// Expectile premium principle: H = E + phi (v_tau - E).
inline PremiumQuote price_epp(double pure, double expectile_tau, double phi,
                              std::string label = {}) {
    if (!(phi >= 0.0)) throw ValidationError("price_epp: phi must be non-negative");
    PremiumQuote q;
    q.principle = Principle::EPP;
    q.pure_premium = pure;
    q.risk_premium = pure + phi * (expectile_tau - pure);
    q.risk_loading = q.risk_premium - pure;
    q.loading_parameter = phi;
    q.label = std::move(label);
    return q;
}

/// Empirical check of the coherence axioms for the sample expectile at
/// tau >= 1/2, plus the downside/upside conditional-mean identity.
struct CoherenceReport {
    struct Axiom {
        std::string name;
        long checks = 0;
        long violations = 0;
        double worst_gap = 0.0;  // largest relative violation observed
    };
    double tau = 0.95;
    long trials = 0;
    std::vector<Axiom> axioms;
    double identity_gap = 0.0;
    bool passed = false;
};

inline CoherenceReport coherence_report(std::span<const double> losses, double tau,
                                        long trials, std::uint64_t rng_seed) {
    if (losses.empty()) throw ValidationError("coherence_report: empty sample");
    if (!(tau >= 0.5 && tau < 1.0))
        throw ValidationError("coherence_report: tau must lie in [0.5, 1)");

    const double tol = 1e-8;
    const std::size_t n = losses.size();
    const double base = sample_expectile(losses, tau);
    double scale = 0.0;
    for (double v : losses) scale += std::fabs(v);
    scale = scale / static_cast<double>(n) + 1.0;

    CoherenceReport report;
    report.tau = tau;
    report.trials = trials;
    report.axioms = {{"translation_invariance"}, {"positive_homogeneity"},
                     {"monotonicity"}, {"subadditivity"}};
    auto& translation = report.axioms[0];
    auto& homogeneity = report.axioms[1];
    auto& monotonicity = report.axioms[2];
    auto& subadditivity = report.axioms[3];

    auto record = [&](CoherenceReport::Axiom& ax, double gap, double reference) {
        ++ax.checks;
        const double rel = gap / (1.0 + std::fabs(reference));
        if (rel > tol) {
            ++ax.violations;
            ax.worst_gap = std::max(ax.worst_gap, rel);
        }
    };

    std::vector<double> work(n), coupled(n);
    std::vector<std::uint32_t> perm(n);

    for (long t = 0; t < trials; ++t) {
        const auto tt = static_cast<std::uint64_t>(t);

        // e(X + h) = e(X) + h
        {
            RngStream rng = RngStream::keyed(rng_seed, tt, 1);
            const double h = rng.next_uniform(-2.0 * scale, 2.0 * scale);
            for (std::size_t i = 0; i < n; ++i) work[i] = losses[i] + h;
            record(translation, std::fabs(sample_expectile(work, tau) - (base + h)), base + h);
        }
        // e(lambda X) = lambda e(X), lambda >= 0
        {
            RngStream rng = RngStream::keyed(rng_seed, tt, 2);
            const double lambda = rng.next_uniform(0.0, 3.0);
            for (std::size_t i = 0; i < n; ++i) work[i] = lambda * losses[i];
            record(homogeneity, std::fabs(sample_expectile(work, tau) - lambda * base),
                   lambda * base);
        }
        // X <= Y pointwise implies e(X) <= e(Y)
        {
            RngStream rng = RngStream::keyed(rng_seed, tt, 3);
            for (std::size_t i = 0; i < n; ++i) work[i] = losses[i] + scale * rng.next_u01();
            record(monotonicity, std::max(0.0, base - sample_expectile(work, tau)), base);
        }
        // e(X + X_pi) <= e(X) + e(X_pi) under a random coupling
        {
            RngStream rng = RngStream::keyed(rng_seed, tt, 4);
            for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const std::size_t j = i + rng.next_below(static_cast<std::uint32_t>(n - i));
                std::swap(perm[i], perm[j]);
            }
            for (std::size_t i = 0; i < n; ++i) coupled[i] = losses[i] + losses[perm[i]];
            record(subadditivity,
                   std::max(0.0, sample_expectile(coupled, tau) - 2.0 * base), 2.0 * base);
        }
    }

    // comonotonic coupling: equality case of subadditivity
    {
        for (std::size_t i = 0; i < n; ++i) coupled[i] = 2.0 * losses[i];
        record(subadditivity, std::fabs(sample_expectile(coupled, tau) - 2.0 * base),
               2.0 * base);
    }

    // v = eta E[X | X > v] + (1 - eta) E[X | X <= v] with eta built from the
    // empirical distribution at v
    {
        double up_sum = 0.0, down_sum = 0.0;
        long up_n = 0, down_n = 0;
        for (double v : losses) {
            if (v > base) { up_sum += v; ++up_n; }
            else { down_sum += v; ++down_n; }
        }
        const double f_v = static_cast<double>(down_n) / static_cast<double>(n);
        const double eta = tau * (1.0 - f_v) / (tau * (1.0 - f_v) + (1.0 - tau) * f_v);
        const double up_mean = up_n ? up_sum / static_cast<double>(up_n) : base;
        const double down_mean = down_n ? down_sum / static_cast<double>(down_n) : base;
        const double recombined = eta * up_mean + (1.0 - eta) * down_mean;
        report.identity_gap = std::fabs(recombined - base) / (1.0 + std::fabs(base));
    }

    report.passed = report.identity_gap <= tol;
    for (const auto& ax : report.axioms)
        if (ax.violations > 0) report.passed = false;
    return report;
}

} // namespace ratekit
