#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpb/features.hpp"
#include "cpb/prob.hpp"

namespace cpb {

/// Dense row-major sample-by-feature matrix.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    static FeatureMatrix from_vectors(const std::vector<FeatureVector>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Binary regression tree; samples with x[feature] <= threshold go left.
struct RegressionTree {
    struct Node {
        std::int32_t feature = -1;  ///< -1 marks a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0;
        bool operator==(const Node&) const = default;
    };
    std::vector<Node> nodes;

    std::size_t leaf_index(std::span<const double> row) const;
    double predict(std::span<const double> row) const { return nodes[leaf_index(row)].value; }
    std::size_t depth() const;
    bool operator==(const RegressionTree&) const = default;
};

struct SplitChoice {
    int feature = -1;  ///< -1 when no split reduces the squared error
    double threshold = 0.0;
    double gain = 0.0;  ///< reduction of the sum of squared errors
};

/// Best variance-reduction split over all features and midpoints between
/// consecutive distinct values. Ties keep the lowest feature, then lowest threshold.
SplitChoice best_split(const FeatureMatrix& x, std::span<const double> targets);

/// Greedy depth-limited tree with mean-valued leaves. Nodes with fewer than
/// `min_split` samples, at `depth_limit`, or with constant targets are leaves.
RegressionTree fit_tree(const FeatureMatrix& x, std::span<const double> targets, int depth_limit, int min_split);

struct GbcConfig {
    int n_estimators = 500;
    int max_depth = 9;
    int min_samples_split = 8;
    double learning_rate = 0.1;
    /// Fraction of features offered to each tree; unset uses all of them.
    std::optional<double> feature_subsample;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct BoostedModel {
    GbcConfig config;
    std::size_t n_features = 0;
    std::vector<double> initial_scores;              ///< per class index
    std::vector<std::vector<RegressionTree>> trees;  ///< [class index][round]
    std::vector<double> train_log_loss;              ///< after each round; [0] is the prior

    std::string serialize() const;
    static BoostedModel deserialize(std::string_view bytes);
};

/// Multinomial boosting with a softmax link. Each round fits one tree per class
/// to onehot - softmax(scores) and sets leaves to the Newton step
/// (K-1)/K * sum r / sum |r|(1-|r|).
BoostedModel gbc_fit(const std::vector<FeatureVector>& features, std::span<const int> labels, const GbcConfig& cfg);

ProbTriple gbc_predict(const BoostedModel& model, const FeatureVector& features);

}  // namespace cpb
