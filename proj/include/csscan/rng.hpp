#ifndef CSSCAN_RNG_HPP
#define CSSCAN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace csscan {

/// Seedable random generator with portable output.
///
/// The engine is std::mt19937_64, whose bit stream is fixed by the C++
/// standard. All distribution transforms are implemented here explicitly
/// (the standard library's distribution classes are implementation-defined),
/// so a given seed produces the same draws on every platform. Plan files and
/// result manifests record the seed; this class is the generator they refer
/// to ("mt19937_64/portable-transforms").
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t min = (0 - n) % n;
        std::uint64_t v = engine_();
        while (v < min) v = engine_();
        return v % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via the Marsaglia polar method (one value per call,
    /// nothing cached, so the stream state is just the engine state).
    double normal() {
        for (;;) {
            const double u = 2.0 * uniform01() - 1.0;
            const double v = 2.0 * uniform01() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0)
                return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Gamma(shape, rate) via Marsaglia-Tsang, with the usual boost for
    /// shape < 1.
    double gamma(double shape, double rate) {
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v / rate;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    /// Poisson(lambda), exact for any lambda: Knuth's multiplication method
    /// applied to chunks of at most 60 (a sum of independent Poissons is
    /// Poisson of the summed mean, and per-chunk products stay far from
    /// underflow).
    std::uint64_t poisson(double lambda) {
        std::uint64_t total = 0;
        while (lambda > 60.0) {
            total += poisson_knuth(60.0);
            lambda -= 60.0;
        }
        return total + poisson_knuth(lambda);
    }

    /// Fisher-Yates shuffle driven by uniform_below, so the permutation is
    /// platform-independent.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static const char* generator_name() { return "mt19937_64/portable-transforms"; }

private:
    std::uint64_t poisson_knuth(double lambda) {
        const double limit = std::exp(-lambda);
        double p = 1.0;
        std::uint64_t k = 0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and tags
/// (splitmix64-style mixing). Used to give parallel work items their own
/// deterministic streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a, std::uint64_t tag_b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ tag_a) ^ tag_b);
}

}  // namespace csscan

#endif
