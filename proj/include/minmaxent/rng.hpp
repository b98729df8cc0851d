#pragma once

#include <cstdint>
#include <limits>
#include <cmath>

namespace mme {

/// Counter-based pseudo-random generator built on the splitmix64 finalizer.
/// The stream is a pure function of (key, counter), so chains can be given
/// independent substreams and any state can be replayed exactly.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng() = default;
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    /// Derive an independent key for substream `index` (chain seeding).
    static std::uint64_t derive(std::uint64_t key, std::uint64_t index) {
        return mix(mix(key) ^ (0xD1B54A32D192ED03ull * (index + 1)));
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Uniform draw in [0, 1) with 53-bit resolution.
inline double uniform01(CounterRng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform draw in [lo, hi).
inline double uniform(CounterRng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal draw via Box-Muller. Stateless: uses two uniforms per call
/// so the stream position does not depend on hidden caches.
inline double gaussian(CounterRng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Uniform integer in [0, n).
inline int uniform_index(CounterRng& rng, int n) {
    return static_cast<int>(uniform01(rng) * n) % n;
}

}  // namespace mme
