// Seeded random number generation with platform-stable draws.
//
// std::mt19937_64 produces an identical bit stream on every conforming
// implementation, but the standard distributions do not. All draws here go
// through hand-rolled mappings so datasets regenerate identically across
// platforms from the same seed.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace slgraph {

// splitmix64, used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        if (lo > hi) throw std::invalid_argument("Rng::uniform: degenerate range (min > max)");
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, bound) via rejection; unbiased and portable.
    std::uint64_t uniform_index(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::uniform_index: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    std::uint64_t raw() { return engine_(); }

    // Independent substream for item `index` under a common base seed.
    static Rng substream(std::uint64_t base_seed, std::uint64_t index) {
        return Rng(mix_seed(base_seed ^ mix_seed(index)));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace slgraph
