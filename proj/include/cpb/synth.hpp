#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpb/dataset.hpp"

namespace cpb {

enum class Mechanism { AdditiveNoiseNonlinear, LinearNonGaussian, Independent, CommonCause };

inline constexpr std::array<Mechanism, 4> kMechanisms{Mechanism::AdditiveNoiseNonlinear, Mechanism::LinearNonGaussian,
                                                      Mechanism::Independent, Mechanism::CommonCause};

std::string to_string(Mechanism m);

/// Mechanism function family; Any draws one per instance.
enum class FunctionFamily { Any, Polynomial, Sigmoid, Sinusoid };

struct GenSpec {
    Mechanism mechanism = Mechanism::AdditiveNoiseNonlinear;
    int n_obs = 500;
    double noise_scale = 0.3;  ///< noise standard deviation relative to the standardized signal
    std::uint64_t seed = 0;
    FunctionFamily family = FunctionFamily::Any;
    /// Overrides the seeded direction coin (true = emit with x and y exchanged).
    std::optional<bool> force_swap;
    std::string id = "syn";

    void validate() const;  // throws ConfigError
};

/// One labeled instance; a pure function of the spec. Outputs are standardized
/// to zero mean and unit variance.
PairInstance generate(const GenSpec& spec);

/// Fractions per mechanism in kMechanisms order; must sum to 1.
using MechanismMix = std::array<double, 4>;

struct BenchmarkSpec {
    int count = 1000;
    MechanismMix mix{0.4, 0.2, 0.2, 0.2};
    int min_obs = 500;
    int max_obs = 500;
    double min_noise = 0.15;
    double max_noise = 0.6;
    std::uint64_t seed = 0;
};

/// Exact allocation: floor(frac * count) per mechanism, leftovers to the largest
/// remainders (earliest mechanism on ties).
std::array<int, 4> allocate_mix(int count, const MechanismMix& mix);

/// Deterministic benchmark, instance order shuffled by the seed.
/// Ids are "syn00000", "syn00001", ...
std::vector<PairInstance> generate_benchmark(const BenchmarkSpec& spec);

/// Which mechanism produced each instance of generate_benchmark(spec), in output order.
std::vector<Mechanism> benchmark_mechanisms(const BenchmarkSpec& spec);

/// Post-step: quantile-free equal-width discretization of numerical attributes into
/// k_x / k_y levels (0 leaves the attribute numerical). Codes follow first appearance;
/// two levels become Binary, more become Categorical.
PairInstance discretize_instance(const PairInstance& instance, int k_x, int k_y);

}  // namespace cpb
