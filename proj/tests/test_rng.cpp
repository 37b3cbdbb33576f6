#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ratekit/rng.hpp"

using ratekit::RngStream;

TEST_CASE("streams are reproducible and keyed independently") {
    RngStream a = RngStream::keyed(42, 1, 2, 3);
    RngStream b = RngStream::keyed(42, 1, 2, 3);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream c = RngStream::keyed(42, 1, 2, 4);
    RngStream d = RngStream::keyed(42, 1, 2, 3);
    bool any_diff = false;
    for (int i = 0; i < 10; ++i) any_diff |= (c.next_u64() != d.next_u64());
    REQUIRE(any_diff);
}

TEST_CASE("uniforms stay inside the open unit interval") {
    RngStream rng = RngStream::keyed(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.next_u01();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
    REQUIRE(lo < 0.01);
    REQUIRE(hi > 0.99);
}

TEST_CASE("poisson and gamma sampling match their moments") {
    RngStream rng = RngStream::keyed(11);
    const int n = 40000;

    double pois_sum = 0.0;
    for (int i = 0; i < n; ++i) pois_sum += static_cast<double>(rng.next_poisson(3.0));
    const double pois_mean = pois_sum / n;
    REQUIRE(std::fabs(pois_mean - 3.0) < 3.0 * std::sqrt(3.0 / n));

    // chunked path for large means
    double big_sum = 0.0;
    for (int i = 0; i < 5000; ++i) big_sum += static_cast<double>(rng.next_poisson(75.0));
    REQUIRE(std::fabs(big_sum / 5000 - 75.0) < 3.0 * std::sqrt(75.0 / 5000));

    double gsum = 0.0, gsq = 0.0;
    const double shape = 0.5385, scale = 40.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_gamma(shape, scale);
        gsum += g;
        gsq += g * g;
    }
    const double gmean = gsum / n;
    const double gvar = gsq / n - gmean * gmean;
    REQUIRE(std::fabs(gmean - shape * scale) < 4.0 * std::sqrt(shape) * scale / std::sqrt(n));
    REQUIRE(std::fabs(gvar - shape * scale * scale) < 0.05 * shape * scale * scale);
}

TEST_CASE("normal draws have unit variance") {
    RngStream rng = RngStream::keyed(13);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_normal();
        sum += z;
        sq += z * z;
    }
    REQUIRE(std::fabs(sum / n) < 0.02);
    REQUIRE(std::fabs(sq / n - 1.0) < 0.03);
}

TEST_CASE("bounded draws respect the bound") {
    RngStream rng = RngStream::keyed(17);
    for (int i = 0; i < 10000; ++i) REQUIRE(rng.next_below(7) < 7);
}
