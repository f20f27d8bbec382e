#include "cpb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpb/error.hpp"
#include "cpb/kernels.hpp"

namespace cpb {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size())
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const { return Tensor(std::move(shape), data_); }

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    if (input.rank() != 3 || kernels.rank() != 4 || kernels.dim(1) != input.dim(0) || kernels.dim(2) != 3 ||
        kernels.dim(3) != 3 || bias.size() != kernels.dim(0))
        throw ShapeError("conv2d: input " + shape_string(input.shape()) + " incompatible with kernels " +
                         shape_string(kernels.shape()) + " / bias " + shape_string(bias.shape()));
    const kernels::Dims in{input.dim(0), input.dim(1), input.dim(2)};
    Tensor out({kernels.dim(0), in.h, in.w});
    kernels::parallel::conv2d_forward(input.data(), in, kernels.data(), bias.data(), kernels.dim(0), out.data());
    return out;
}

Tensor maxpool_forward(const Tensor& input) {
    if (input.rank() != 3 || input.dim(1) < 2 || input.dim(2) < 2)
        throw ShapeError("maxpool: input " + shape_string(input.shape()) + " needs rank 3 with H, W >= 2");
    const kernels::Dims in{input.dim(0), input.dim(1), input.dim(2)};
    Tensor out({in.c, in.h / 2, in.w / 2});
    std::vector<std::uint32_t> argmax(out.size());
    kernels::parallel::maxpool_forward(input.data(), in, out.data(), argmax);
    return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2 || weights.dim(1) != input.size() || bias.size() != weights.dim(0))
        throw ShapeError("dense: input " + shape_string(input.shape()) + " incompatible with weights " +
                         shape_string(weights.shape()) + " / bias " + shape_string(bias.shape()));
    Tensor out({weights.dim(0)});
    kernels::parallel::dense_forward(input.data(), weights.data(), bias.data(), out.data());
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double cross_entropy(std::span<const double> probabilities, std::size_t true_class) {
    if (true_class >= probabilities.size())
        throw std::out_of_range("cross_entropy: class " + std::to_string(true_class) + " out of range for " +
                                std::to_string(probabilities.size()) + " probabilities");
    return -std::log(probabilities[true_class] + kCrossEntropyEps);
}

}  // namespace cpb
