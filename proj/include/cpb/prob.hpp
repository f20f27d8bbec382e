#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace cpb {

/// Class distribution over {x -> y, no direct causation, y -> x}.
struct ProbTriple {
    double p1 = 1.0 / 3.0;
    double p0 = 1.0 / 3.0;
    double p_neg1 = 1.0 / 3.0;

    double sum() const noexcept { return p1 + p0 + p_neg1; }
    /// Signed direction score p1 - p_neg1.
    double score() const noexcept { return p1 - p_neg1; }
    bool valid(double tol = 1e-9) const noexcept {
        return p1 >= 0 && p0 >= 0 && p_neg1 >= 0 && p1 <= 1 && p0 <= 1 && p_neg1 <= 1 && std::abs(sum() - 1.0) <= tol;
    }
    bool operator==(const ProbTriple&) const = default;
};

// Fixed label <-> class-index bijection: 1 -> 0, 0 -> 1, -1 -> 2.
inline constexpr std::array<int, 3> kClassLabels{1, 0, -1};

inline std::size_t label_to_class(int label) {
    switch (label) {
        case 1: return 0;
        case 0: return 1;
        case -1: return 2;
    }
    throw std::invalid_argument("label " + std::to_string(label) + " not in {1,0,-1}");
}

inline int class_to_label(std::size_t cls) {
    if (cls > 2) throw std::invalid_argument("class index " + std::to_string(cls) + " out of range");
    return kClassLabels[cls];
}

/// Probabilities indexed by class index (see label_to_class).
inline ProbTriple triple_from_classes(std::span<const double> p) {
    if (p.size() != 3) throw std::invalid_argument("expected 3 class probabilities");
    return {p[0], p[1], p[2]};
}

}  // namespace cpb
