#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace coxbvs {

// Deterministic RNG used everywhere in the library. All transforms are
// implemented explicitly (the <random> distributions are not guaranteed to
// produce the same stream across standard library implementations, which
// would break run-to-run reproducibility of stored chains).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_below(std::uint64_t n) {
        // Rejection to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller (single value per call, no cached state).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Gamma with given shape and *rate* (mean = shape/rate), Marsaglia-Tsang.
    double gamma_rate(double shape, double rate) {
        if (!(shape > 0.0) || !(rate > 0.0))
            throw std::invalid_argument("gamma_rate: shape and rate must be positive");
        if (shape < 1.0) {
            // Boost shape by 1 and correct with u^(1/shape).
            const double u = std::pow(uniform_positive(), 1.0 / shape);
            return u * gamma_rate(shape + 1.0, rate);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_positive();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    double uniform_positive() {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return u;
    }

    std::mt19937_64 engine_;
};

// Stateless seed derivation for independent sub-streams (replications,
// subgroups, pipeline stages) from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace coxbvs
