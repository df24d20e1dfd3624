#include "dimrank/rng.hpp"

#include <cmath>
#include <numbers>

namespace dimrank {

double Rng::normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng entity_rng(std::uint64_t seed, EntityKind kind, std::uint64_t id) {
    const std::uint64_t k = static_cast<std::uint64_t>(kind) + 1;
    return Rng(splitmix64(splitmix64(seed ^ (k << 56)) ^ splitmix64(id)));
}

}  // namespace dimrank
