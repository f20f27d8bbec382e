#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpb {

/// Seedable generator with a fixed, portable output contract.
///
/// The engine is std::mt19937_64 (whose output sequence is pinned by the
/// C++ standard) seeded with a single 64-bit value. All derived draws are
/// computed here rather than through <random> distributions, whose
/// algorithms differ between standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound) by rejection; bound > 0.
    std::uint64_t uniform_int(std::uint64_t bound);

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (no cached second variate).
    double normal();

    /// Laplace(0, 1) by inverse CDF.
    double laplace();

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a sub-stream identified by an integer index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Seed for a sub-stream identified by a string (e.g. an instance id).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// 64-bit FNV-1a, used for data and file checksums.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

}  // namespace cpb
