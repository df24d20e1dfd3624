#pragma once

#include <cstdint>
#include <random>

#include "dimrank/ids.hpp"

namespace dimrank {

// std:: distributions are implementation-defined, so the mapping from raw
// engine output to reals is done here to keep checkpoints portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Lemire-free simple rejection; n is small everywhere we use it.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (one value per call).
    double normal();

    template <class Container>
    void shuffle(Container& c) {
        for (std::size_t i = c.size(); i > 1; --i) {
            std::swap(c[i - 1], c[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic per-entity stream: the same (seed, kind, id) always yields
/// the same initial embedding regardless of the order entities appear in.
Rng entity_rng(std::uint64_t seed, EntityKind kind, std::uint64_t id);

}  // namespace dimrank
