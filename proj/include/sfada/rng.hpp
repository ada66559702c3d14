#pragma once
#include <cmath>
#include <cstdint>

namespace sfada {

// splitmix64 step: advances state and returns the next 64-bit value.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (a, b). Chain for more arguments.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a;
    uint64_t h = splitmix64(s) ^ (b * 0xff51afd7ed558ccdull + 0x2545f4914f6cdd1dull);
    return splitmix64(h);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

// Deterministic PRNG used everywhere seeded behavior is promised.
// All distributions are built from splitmix64 only, so results are
// identical across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() { return splitmix64(state_); }

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller; one value per call (no cached pair,
    // keeps draw counts predictable).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Independent child stream; does not advance this generator.
    Rng child(uint64_t salt) const { return Rng(mix_seed(state_, salt)); }

private:
    uint64_t state_;
};

}  // namespace sfada
