#pragma once

#include <cstdint>
#include <random>

namespace dlab {

// splitmix64 step; the documented, bit-exact seed derivation for chains.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Chain k of a run seeded with `seed` uses the (k+1)-th splitmix64 output.
inline std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t chain_index) {
    std::uint64_t state = seed;
    std::uint64_t out = 0;
    for (std::uint64_t i = 0; i <= chain_index; ++i) out = splitmix64(state);
    return out;
}

// mt19937_64 wrapper with a platform-independent uniform in [0,1).
// std::uniform_real_distribution is avoided: its output is not pinned down
// by the standard, and sampler runs must be bit-exact given a seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    std::uint64_t bits() { return gen_(); }

    // Uniform integer in [0, n) by rejection; exact and reproducible.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace dlab
