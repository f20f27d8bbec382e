#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cpb {

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Element access for rank-3 tensors (channel, row, column).
    double& at(std::size_t c, std::size_t i, std::size_t j) { return data_[(c * shape_[1] + i) * shape_[2] + j]; }
    double at(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    void fill(double v);
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::size_t shape_product(const std::vector<std::size_t>& shape);

// Shape-checked operations over Tensors (throw ShapeError on mismatch).
// These dispatch to the OpenMP kernels in cpb/kernels.hpp.

/// input [C,H,W], kernels [K,C,3,3], bias [K] -> [K,H,W]; stride 1, zero "same" padding.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

/// 2x2 window, stride 2; trailing odd row/column dropped.
Tensor maxpool_forward(const Tensor& input);

/// input [n] (any shape with n elements), weights [u,n], bias [u] -> [u].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kCrossEntropyEps = 1e-12;

/// -log(p[true_class] + 1e-12); throws std::out_of_range for a bad index.
double cross_entropy(std::span<const double> probabilities, std::size_t true_class);

}  // namespace cpb
