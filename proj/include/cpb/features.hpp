#pragma once

#include <span>
#include <string>
#include <vector>

#include "cpb/dataset.hpp"

namespace cpb {

/// Bin count used by the entropy, mutual-information and conditional features.
inline constexpr int kFeatureBins = 10;

/// Statistical descriptors of one pair, ordered as feature_names().
struct FeatureVector {
    std::vector<double> values;
    bool operator==(const FeatureVector&) const = default;
};

/// The 43 feature identifiers, in extraction order.
///
/// Directional features come in pairs ("x_..."/"y_...", "..._y|x"/"..._x|y",
/// "...x->y"/"...y->x"); swapping x and y exchanges the members of each pair
/// and leaves the symmetric ones (log_n, correlations, mutual information)
/// unchanged.
const std::vector<std::string>& feature_names();
std::size_t feature_count();

/// For each feature index i, the index holding the same quantity after x and y
/// are exchanged.
const std::vector<std::size_t>& swap_permutation();

/// Requires at least two observations (ValidationError otherwise). Always finite.
FeatureVector extract_features(const PairInstance& instance);

/// Parallel over instances; results in input order.
std::vector<FeatureVector> extract_all(const std::vector<PairInstance>& instances);

/// CSV: header "id,<names...>", one row per instance.
std::string format_feature_matrix(const std::vector<PairInstance>& instances,
                                  const std::vector<FeatureVector>& features);

}  // namespace cpb
