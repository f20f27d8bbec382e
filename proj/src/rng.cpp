#include "cpb/rng.hpp"

#include <cmath>
#include <numbers>

namespace cpb {

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
    // Largest multiple of bound representable; draws above it are rejected.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % bound;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::laplace() {
    double u = uniform() - 0.5;
    while (u == -0.5) u = uniform() - 0.5;
    const double s = u < 0 ? -1.0 : 1.0;
    return -s * std::log(1.0 - 2.0 * std::abs(u));
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ index);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
    return mix64(mix64(seed) ^ fnv1a64(key));
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= 0x100000001b3ULL;
    }
    return state;
}

}  // namespace cpb
