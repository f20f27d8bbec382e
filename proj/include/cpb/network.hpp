#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cpb/kernels.hpp"
#include "cpb/tensor.hpp"

namespace cpb {

/// Layer descriptions used to build a Network.
namespace layer {
struct Conv {
    std::size_t out_channels;  ///< 3x3 kernel, stride 1, zero "same" padding
};
struct MaxPool {};  ///< 2x2 window, stride 2
struct Dense {
    std::size_t units;
};
struct Relu {};
struct Softmax {};
}  // namespace layer

using LayerSpec = std::variant<layer::Conv, layer::MaxPool, layer::Dense, layer::Relu, layer::Softmax>;

struct InputShape {
    std::size_t channels, height, width;
    bool operator==(const InputShape&) const = default;
};

/// One instantiated layer with its parameters (empty for parameter-free layers).
struct Layer {
    enum class Kind : std::uint8_t { Conv = 1, MaxPool = 2, Dense = 3, Relu = 4, Softmax = 5 };
    Kind kind;
    std::string name;
    std::vector<std::size_t> in_shape;
    std::vector<std::size_t> out_shape;
    Tensor weights;  // Conv [K,C,3,3]; Dense [u,n]
    Tensor bias;     // [K] / [u]

    bool has_parameters() const noexcept { return kind == Kind::Conv || kind == Kind::Dense; }
};

/// Parameter tensors in declaration order: for each parameterized layer, weights then bias.
struct Gradients {
    std::vector<Tensor> tensors;
    void zero();
    void add(const Gradients& other);
    void scale(double s);
};

/// Activations recorded by a forward pass, needed by backward().
struct ForwardTrace {
    std::vector<Tensor> activations;                 // [0] is the input, [i+1] is the output of layer i
    std::vector<std::vector<std::uint32_t>> argmax;  // per layer; non-empty for pooling layers
};

/// Feed-forward stack of conv/pool/dense/relu layers ending in softmax.
class Network {
public:
    Network() = default;

    /// Builds the layers and draws He-uniform weights (limit sqrt(6 / fan_in)) from `seed`; biases start at zero.
    Network(InputShape input, const std::vector<LayerSpec>& specs, std::uint64_t seed);

    const InputShape& input_shape() const noexcept { return input_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    std::size_t output_size() const;

    void set_backend(kernels::Backend b) noexcept { backend_ = b; }
    kernels::Backend backend() const noexcept { return backend_; }

    ForwardTrace forward(const Tensor& input) const;
    /// Softmax output for one input.
    std::vector<double> predict(const Tensor& input) const;
    /// Cross-entropy of the softmax output against `true_class`.
    double loss(const Tensor& input, std::size_t true_class) const;

    /// Accumulates d loss / d parameters into `grads` (must come from zero_gradients()).
    /// When `input_grad` is non-null it receives d loss / d input.
    void backward(const ForwardTrace& trace, std::size_t true_class, Gradients& grads,
                  Tensor* input_grad = nullptr) const;

    Gradients zero_gradients() const;
    std::size_t parameter_count() const;

    /// Views over parameter tensors, same order as Gradients::tensors.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    /// Layer name owning the parameter tensor at `index`.
    std::string parameter_owner(std::size_t index) const;

    /// Versioned little-endian binary encoding of the layer list and parameters.
    std::string serialize() const;
    static Network deserialize(std::string_view bytes);

    bool operator==(const Network& other) const;

private:
    void add_layer(const LayerSpec& spec, std::vector<std::size_t>& shape, std::size_t& conv_n, std::size_t& dense_n);

    InputShape input_{};
    std::vector<Layer> layers_;
    kernels::Backend backend_ = kernels::Backend::Parallel;
};

/// Analytic gradients of the loss for one example: parameters plus the input.
struct BackwardResult {
    Gradients parameters;
    Tensor input;
};
BackwardResult backward(const Network& network, const Tensor& input, std::size_t true_class);

struct GradientCheckOptions {
    double epsilon = 1e-5;
    std::size_t sample_size = 200;  ///< parameters probed; all of them if the network has fewer
    std::uint64_t seed = 0;
};

/// Max relative error |a - n| / max(|a|, |n|, 1e-8) between analytic gradients
/// and central differences over a random subsample of parameters.
/// Throws ConfigError when epsilon is outside [1e-7, 1e-4].
double gradient_check(const Network& network, const Tensor& input, std::size_t true_class,
                      const GradientCheckOptions& options = {});

/// Momentum SGD: v = momentum * v - lr * g; p += v.
class SgdOptimizer {
public:
    SgdOptimizer(const Network& network, double learning_rate, double momentum);

    /// Throws TrainingError naming the layer if a gradient is not finite.
    void step(Network& network, const Gradients& grads);

    double learning_rate() const noexcept { return lr_; }
    double momentum() const noexcept { return momentum_; }

private:
    double lr_;
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

}  // namespace cpb
