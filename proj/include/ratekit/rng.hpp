#pragma once

#include <cmath>
#include <cstdint>

#include "ratekit/errors.hpp"

namespace ratekit {

/// SplitMix64 finalizer. Bijective on 64-bit integers, passes BigCrush when
/// driven by a Weyl sequence, which is exactly how RngStream uses it.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

/// Derives an independent stream key from a master seed and up to three
/// sub-stream indices (e.g. replicate, policy, draw purpose). Each argument
/// is mixed through the finalizer so that neighbouring indices give
/// uncorrelated keys.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t k = mix64(seed + kWeyl);
    k = mix64(k ^ (a + 0xD1B54A32D192ED03ULL));
    k = mix64(k ^ (b + 0x8CB92BA72F3D8DD7ULL));
    k = mix64(k ^ (c + 0xEB44ACCAB455D165ULL));
    return k;
}

/// Counter-based random stream: output i is mix64(key + (i+1)*Weyl).
/// Streams with distinct keys are independent, and a stream's output depends
/// only on (key, counter), never on call order elsewhere in the program.
/// This is what makes parallel simulation runs bit-reproducible.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    static RngStream keyed(std::uint64_t seed, std::uint64_t a = 0,
                           std::uint64_t b = 0, std::uint64_t c = 0) {
        return RngStream(derive_key(seed, a, b, c));
    }

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kWeyl); }

    /// Uniform on the open interval (0,1): 53-bit mantissa, offset by half an ulp.
    double next_u01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) { return next_u01() < p; }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

    /// Standard normal via Box-Muller (cosine branch only, two uniforms per draw).
    double next_normal() {
        const double u1 = next_u01();
        const double u2 = next_u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Gamma(shape, scale) by Marsaglia-Tsang squeeze; shapes below one use
    /// the boosting identity G(a) = G(a+1) * U^{1/a}.
    double next_gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0)
            throw DomainError("next_gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = next_u01();
            return next_gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = next_normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = next_u01();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
                return d * v * scale;
        }
    }

    /// Poisson by Knuth's product-of-uniforms method. Large means are split
    /// into chunks of 30 so the running product stays far above the smallest
    /// representable uniform; the chunk sum is still exactly Poisson.
    long next_poisson(double lambda) {
        if (lambda < 0.0) throw DomainError("next_poisson: negative mean");
        long total = 0;
        while (lambda > 30.0) {
            total += poisson_knuth(30.0);
            lambda -= 30.0;
        }
        return total + poisson_knuth(lambda);
    }

    /// Integer in [0, n) by 64x32-bit multiply-shift.
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<std::uint64_t>(next_u64() >> 32) * n) >> 32);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    long poisson_knuth(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        long k = 0;
        double prod = next_u01();
        while (prod > limit) {
            ++k;
            prod *= next_u01();
        }
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace ratekit
