#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ratekit/principles.hpp"
#include "ratekit/rng.hpp"
#include "ratekit/simulator.hpp"

using namespace ratekit;

TEST_CASE("expected value principle") {
    CHECK(price_evpp(100.0, 0.0).risk_premium == 100.0);

    // published class pairs, loading parameter rounded to four digits
    const auto c1 = price_evpp(522.88, 0.1197);
    CHECK(std::fabs(c1.risk_premium - 585.45) < 0.05);
    const auto c24 = price_evpp(216.82, 0.1197);
    CHECK(std::fabs(c24.risk_premium - 242.77) < 0.02);

    CHECK_THROWS_AS(price_evpp(100.0, -0.1), ValidationError);
}

TEST_CASE("standard deviation principle") {
    CHECK(price_sdpp(100.0, 0.0, 0.5).risk_premium == 100.0);
    const auto once = price_sdpp(100.0, 400.0, 0.02);
    const auto twice = price_sdpp(100.0, 400.0, 0.04);
    CHECK(twice.risk_loading == Catch::Approx(2.0 * once.risk_loading).margin(1e-12));
    CHECK_THROWS_AS(price_sdpp(100.0, -1.0, 0.1), ValidationError);
}

TEST_CASE("quantile premium principle") {
    CHECK(price_qpp(100.0, 500.0, 0.0).risk_premium == 100.0);
    CHECK(price_qpp(100.0, 500.0, 1.0).risk_premium == 500.0);
    CHECK_FALSE(price_qpp(100.0, 500.0, 0.5).parameter_warning);
    CHECK(price_qpp(100.0, 500.0, 1.5).parameter_warning);
}

TEST_CASE("two-stage quantile principle") {
    CHECK(price_tsqpp(1.0, 700.0, 0.0, 0.79).risk_premium == 0.0);
    const auto flagged = price_tsqpp(0.875, 300.0, 300.0, 0.7908);
    CHECK(flagged.risk_premium == Catch::Approx(0.125 * 300.0));
    CHECK(flagged.negative_loading);
    CHECK_THROWS_AS(price_tsqpp(0.0, 100.0, 50.0, 0.9), ValidationError);
}

TEST_CASE("expectile premium principle") {
    CHECK(price_epp(100.0, 900.0, 0.0).risk_premium == 100.0);
    const auto q = price_epp(200.0, 800.0, 0.0285);
    CHECK(q.risk_premium == Catch::Approx(200.0 + 0.0285 * 600.0).epsilon(1e-14));
}

TEST_CASE("quotes always decompose into pure premium plus loading") {
    const std::vector<PremiumQuote> quotes = {
        price_evpp(522.88, 0.1197),          price_sdpp(302.31, 2200.0, 0.0231),
        price_qpp(296.12, 1400.0, 0.03),     price_tsqpp(0.843, 440.0, 296.12, 0.7908),
        price_epp(484.58, 2300.0, 0.0285)};
    for (const auto& q : quotes)
        CHECK(std::fabs(q.risk_premium - (q.pure_premium + q.risk_loading)) <=
              1e-9 * std::max(1.0, std::fabs(q.risk_premium)));
}

TEST_CASE("coherence axioms hold empirically for the sample expectile") {
    RngStream rng = RngStream::keyed(2024, 5);
    std::vector<double> sample;
    sample.reserve(600);
    for (int i = 0; i < 600; ++i) sample.push_back(sample_tweedie(300.0, 1.65, 120.0, rng));

    for (double tau : {0.5, 0.95}) {
        const auto rep = coherence_report(sample, tau, 200, 99);
        INFO("tau = " << tau);
        CHECK(rep.passed);
        for (const auto& ax : rep.axioms) {
            INFO(ax.name);
            CHECK(ax.violations == 0);
            CHECK(ax.checks >= 200);
        }
        CHECK(rep.identity_gap <= 1e-8);
    }

    SECTION("direct shift and scale identities") {
        const double tau = 0.9;
        const double base = sample_expectile(sample, tau);
        std::vector<double> shifted = sample, scaled = sample;
        for (auto& v : shifted) v += 10.0;
        for (auto& v : scaled) v *= 2.0;
        CHECK(sample_expectile(shifted, tau) ==
              Catch::Approx(base + 10.0).margin(1e-7 * (1.0 + base)));
        CHECK(sample_expectile(scaled, tau) ==
              Catch::Approx(2.0 * base).margin(1e-7 * (1.0 + base)));
    }

    SECTION("expectile dominates the mean at upper levels") {
        double mean = 0.0;
        for (double v : sample) mean += v;
        mean /= static_cast<double>(sample.size());
        for (double tau : {0.5, 0.75, 0.9, 0.95})
            CHECK(sample_expectile(sample, tau) >= mean - 1e-9);
    }

    SECTION("validation") {
        CHECK_THROWS_AS(coherence_report(sample, 0.4, 10, 1), ValidationError);
        CHECK_THROWS_AS(coherence_report(std::vector<double>{}, 0.9, 10, 1),
                        ValidationError);
    }
}
