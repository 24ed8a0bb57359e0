#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace spde {

/// SplitMix64 step. Used only to derive well-separated seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for replica `index` (and optional sub-stream) of an ensemble.
/// Pure function of its arguments, so replicas can be generated in any order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t stream = 0) noexcept {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ (index * 0xD1B54A32D192ED03ULL);
    std::uint64_t b = splitmix64(s);
    s = b ^ (stream * 0x8CB92BA72F3D8DD7ULL);
    return splitmix64(s);
}

/// The generator every sampler in the library draws from: std::mt19937_64
/// seeded through SplitMix64, with the few variate transforms we need written
/// out explicitly so a seed reproduces the same stream on every build.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)),
                          static_cast<std::uint32_t>(splitmix64(s)),
                          static_cast<std::uint32_t>(splitmix64(s)),
                          static_cast<std::uint32_t>(splitmix64(s))};
        engine_.seed(seq);
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential() { return -std::log(uniform()); }

    double normal() {
        // Box-Muller, one variate per call.
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        return r * std::cos(2.0 * M_PI * uniform());
    }

    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        std::poisson_distribution<std::uint64_t> dist(mean);
        return dist(engine_);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace spde
