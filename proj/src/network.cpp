#include "cpb/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binio.hpp"
#include "cpb/error.hpp"
#include "cpb/rng.hpp"

namespace cpb {

namespace {

constexpr std::string_view kMagic = "CPBN";
constexpr std::uint32_t kVersion = 1;

kernels::Dims dims_of(const std::vector<std::size_t>& shape) { return {shape[0], shape[1], shape[2]}; }

void he_uniform_fill(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.values()) v = rng.uniform(-limit, limit);
}

}  // namespace

void Gradients::zero() {
    for (auto& t : tensors) t.fill(0.0);
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto dst = tensors[i].data();
        auto src = other.tensors[i].data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
}

void Gradients::scale(double s) {
    for (auto& t : tensors)
        for (auto& v : t.values()) v *= s;
}

Network::Network(InputShape input, const std::vector<LayerSpec>& specs, std::uint64_t seed) : input_(input) {
    if (input.channels == 0 || input.height == 0 || input.width == 0)
        throw ConfigError("network input shape must be positive");
    std::vector<std::size_t> shape{input.channels, input.height, input.width};
    std::size_t conv_n = 0, dense_n = 0;
    for (const auto& spec : specs) add_layer(spec, shape, conv_n, dense_n);
    if (layers_.empty() || layers_.back().kind != Layer::Kind::Softmax)
        throw ConfigError("network must end with a softmax layer");

    Rng rng(seed);
    for (auto& l : layers_) {
        if (l.kind == Layer::Kind::Conv)
            he_uniform_fill(l.weights, l.weights.dim(1) * 9, rng);
        else if (l.kind == Layer::Kind::Dense)
            he_uniform_fill(l.weights, l.weights.dim(1), rng);
    }
}

void Network::add_layer(const LayerSpec& spec, std::vector<std::size_t>& shape, std::size_t& conv_n,
                        std::size_t& dense_n) {
    if (!layers_.empty() && layers_.back().kind == Layer::Kind::Softmax)
        throw ConfigError("softmax must be the last layer");
    Layer l;
    l.in_shape = shape;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, layer::Conv>) {
                if (shape.size() != 3) throw ConfigError("conv layer needs a [C,H,W] input");
                if (s.out_channels == 0) throw ConfigError("conv layer needs at least one output channel");
                l.kind = Layer::Kind::Conv;
                l.name = "conv" + std::to_string(++conv_n);
                l.weights = Tensor({s.out_channels, shape[0], 3, 3});
                l.bias = Tensor({s.out_channels});
                shape = {s.out_channels, shape[1], shape[2]};
            } else if constexpr (std::is_same_v<T, layer::MaxPool>) {
                if (shape.size() != 3 || shape[1] < 2 || shape[2] < 2)
                    throw ConfigError("pool layer needs a [C,H,W] input with H, W >= 2, got " + shape_string(shape));
                l.kind = Layer::Kind::MaxPool;
                l.name = "pool";
                shape = {shape[0], shape[1] / 2, shape[2] / 2};
            } else if constexpr (std::is_same_v<T, layer::Dense>) {
                if (s.units == 0) throw ConfigError("dense layer needs at least one unit");
                l.kind = Layer::Kind::Dense;
                l.name = "dense" + std::to_string(++dense_n);
                const auto n = shape_product(shape);
                l.weights = Tensor({s.units, n});
                l.bias = Tensor({s.units});
                shape = {s.units};
            } else if constexpr (std::is_same_v<T, layer::Relu>) {
                l.kind = Layer::Kind::Relu;
                l.name = "relu";
            } else {
                if (shape.size() != 1) throw ConfigError("softmax needs a flat input");
                l.kind = Layer::Kind::Softmax;
                l.name = "softmax";
            }
        },
        spec);
    l.out_shape = shape;
    layers_.push_back(std::move(l));
}

std::size_t Network::output_size() const { return layers_.empty() ? 0 : shape_product(layers_.back().out_shape); }

ForwardTrace Network::forward(const Tensor& input) const {
    const std::vector<std::size_t> expected{input_.channels, input_.height, input_.width};
    if (input.size() != shape_product(expected))
        throw ShapeError("network input " + shape_string(input.shape()) + " does not match " +
                         shape_string(expected));
    const bool par = backend_ == kernels::Backend::Parallel;
    ForwardTrace t;
    t.activations.reserve(layers_.size() + 1);
    t.argmax.resize(layers_.size());
    t.activations.push_back(input.shape() == expected ? input : input.reshaped(expected));
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        const Tensor& x = t.activations.back();
        Tensor y(l.out_shape);
        switch (l.kind) {
            case Layer::Kind::Conv:
                (par ? kernels::parallel::conv2d_forward : kernels::serial::conv2d_forward)(
                    x.data(), dims_of(l.in_shape), l.weights.data(), l.bias.data(), l.weights.dim(0), y.data());
                break;
            case Layer::Kind::MaxPool:
                t.argmax[li].resize(y.size());
                (par ? kernels::parallel::maxpool_forward : kernels::serial::maxpool_forward)(
                    x.data(), dims_of(l.in_shape), y.data(), t.argmax[li]);
                break;
            case Layer::Kind::Dense:
                (par ? kernels::parallel::dense_forward : kernels::serial::dense_forward)(
                    x.data(), l.weights.data(), l.bias.data(), y.data());
                break;
            case Layer::Kind::Relu:
                for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
                break;
            case Layer::Kind::Softmax:
                y.values() = softmax(x.data());
                break;
        }
        t.activations.push_back(std::move(y));
    }
    return t;
}

std::vector<double> Network::predict(const Tensor& input) const { return forward(input).activations.back().values(); }

double Network::loss(const Tensor& input, std::size_t true_class) const {
    return cross_entropy(forward(input).activations.back().data(), true_class);
}

void Network::backward(const ForwardTrace& trace, std::size_t true_class, Gradients& grads, Tensor* input_grad) const {
    const bool par = backend_ == kernels::Backend::Parallel;
    const auto& probs = trace.activations.back();
    if (true_class >= probs.size())
        throw std::out_of_range("backward: class " + std::to_string(true_class) + " out of range");

    // Gradient of -log(p_c + eps) with respect to the softmax input.
    const double pc = probs[true_class];
    const double factor = pc / (pc + kCrossEntropyEps);
    Tensor delta(probs.shape());
    for (std::size_t j = 0; j < probs.size(); ++j) delta[j] = factor * (probs[j] - (j == true_class ? 1.0 : 0.0));

    // Parameter tensors are numbered from the front; walk them from the back.
    std::size_t param_index = 0;
    for (const auto& l : layers_)
        if (l.has_parameters()) param_index += 2;

    const std::size_t n_layers = layers_.size();
    for (std::size_t li = n_layers - 1; li-- > 0;) {  // the softmax layer is folded into delta
        const Layer& l = layers_[li];
        const Tensor& x = trace.activations[li];
        const bool need_dx = li > 0 || input_grad != nullptr;
        Tensor dx;
        if (need_dx) dx = Tensor(l.in_shape);
        switch (l.kind) {
            case Layer::Kind::Conv: {
                param_index -= 2;
                auto& dw = grads.tensors[param_index];
                auto& db = grads.tensors[param_index + 1];
                (par ? kernels::parallel::conv2d_backward : kernels::serial::conv2d_backward)(
                    x.data(), dims_of(l.in_shape), l.weights.data(), l.weights.dim(0), delta.data(),
                    need_dx ? dx.data() : std::span<double>{}, dw.data(), db.data());
                break;
            }
            case Layer::Kind::Dense: {
                param_index -= 2;
                auto& dw = grads.tensors[param_index];
                auto& db = grads.tensors[param_index + 1];
                (par ? kernels::parallel::dense_backward : kernels::serial::dense_backward)(
                    x.data(), l.weights.data(), delta.data(), need_dx ? dx.data() : std::span<double>{}, dw.data(),
                    db.data());
                break;
            }
            case Layer::Kind::MaxPool:
                if (need_dx)
                    (par ? kernels::parallel::maxpool_backward : kernels::serial::maxpool_backward)(
                        delta.data(), trace.argmax[li], dx.data());
                break;
            case Layer::Kind::Relu:
                if (need_dx)
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = x[i] > 0.0 ? delta[i] : 0.0;
                break;
            case Layer::Kind::Softmax:
                throw ConfigError("softmax is only supported as the final layer");
        }
        if (!need_dx) break;
        delta = std::move(dx);
    }
    if (input_grad) {
        const std::vector<std::size_t> in_shape{input_.channels, input_.height, input_.width};
        *input_grad = delta.shape() == in_shape ? std::move(delta) : delta.reshaped(in_shape);
    }
}

Gradients Network::zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_)
        if (l.has_parameters()) {
            g.tensors.emplace_back(l.weights.shape());
            g.tensors.emplace_back(l.bias.shape());
        }
    return g;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        if (l.has_parameters()) n += l.weights.size() + l.bias.size();
    return n;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        if (l.has_parameters()) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_)
        if (l.has_parameters()) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
    return out;
}

std::string Network::parameter_owner(std::size_t index) const {
    std::size_t i = 0;
    for (const auto& l : layers_)
        if (l.has_parameters()) {
            if (index == i) return l.name + ".weight";
            if (index == i + 1) return l.name + ".bias";
            i += 2;
        }
    return "?";
}

std::string Network::serialize() const {
    binio::Writer w;
    w.bytes(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(input_.channels));
    w.u32(static_cast<std::uint32_t>(input_.height));
    w.u32(static_cast<std::uint32_t>(input_.width));
    w.u32(static_cast<std::uint32_t>(layers_.size()));
    for (const auto& l : layers_) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        const std::uint32_t units = l.has_parameters() ? static_cast<std::uint32_t>(l.weights.dim(0)) : 0;
        w.u32(units);
    }
    for (const auto* p : parameters())
        for (double v : p->data()) w.f64(v);
    return w.take();
}

Network Network::deserialize(std::string_view bytes) {
    binio::Reader r(bytes, "network");
    if (r.bytes(4) != kMagic) throw ValidationError("network: bad magic bytes");
    const auto version = r.u32();
    if (version != kVersion) throw ValidationError("network: unsupported format version " + std::to_string(version));
    InputShape in{};
    in.channels = r.u32();
    in.height = r.u32();
    in.width = r.u32();
    const auto n_layers = r.u32();
    std::vector<LayerSpec> specs;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto kind = static_cast<Layer::Kind>(r.u8());
        const auto units = r.u32();
        switch (kind) {
            case Layer::Kind::Conv: specs.emplace_back(layer::Conv{units}); break;
            case Layer::Kind::MaxPool: specs.emplace_back(layer::MaxPool{}); break;
            case Layer::Kind::Dense: specs.emplace_back(layer::Dense{units}); break;
            case Layer::Kind::Relu: specs.emplace_back(layer::Relu{}); break;
            case Layer::Kind::Softmax: specs.emplace_back(layer::Softmax{}); break;
            default: throw ValidationError("network: unknown layer type " + std::to_string(int(kind)));
        }
    }
    Network net(in, specs, 0);
    for (auto* p : net.parameters())
        for (auto& v : p->values()) v = r.f64();
    if (!r.done()) throw ValidationError("network: trailing bytes after parameters");
    return net;
}

bool Network::operator==(const Network& other) const {
    if (!(input_ == other.input_) || layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.kind != b.kind || a.out_shape != b.out_shape || a.weights != b.weights || a.bias != b.bias) return false;
    }
    return true;
}

BackwardResult backward(const Network& network, const Tensor& input, std::size_t true_class) {
    BackwardResult r{network.zero_gradients(), Tensor{}};
    network.backward(network.forward(input), true_class, r.parameters, &r.input);
    return r;
}

double gradient_check(const Network& network, const Tensor& input, std::size_t true_class,
                      const GradientCheckOptions& options) {
    if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-4))
        throw ConfigError("gradient_check epsilon must lie in [1e-7, 1e-4]");
    const auto analytic = backward(network, input, true_class).parameters;

    // Flat (tensor, element) index over all parameters.
    std::vector<std::pair<std::size_t, std::size_t>> all;
    const auto params = network.parameters();
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t e = 0; e < params[t]->size(); ++e) all.emplace_back(t, e);
    std::vector<std::size_t> chosen(all.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (all.size() > options.sample_size) {
        Rng rng(options.seed);
        for (std::size_t i = 0; i < options.sample_size; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.uniform_int(all.size() - i));
            std::swap(chosen[i], chosen[j]);
        }
        chosen.resize(options.sample_size);
    }

    Network probe = network;
    auto probe_params = probe.parameters();
    double worst = 0.0;
    for (auto idx : chosen) {
        const auto [t, e] = all[idx];
        double& p = (*probe_params[t])[e];
        const double saved = p;
        p = saved + options.epsilon;
        const double up = probe.loss(input, true_class);
        p = saved - options.epsilon;
        const double down = probe.loss(input, true_class);
        p = saved;
        const double numeric = (up - down) / (2.0 * options.epsilon);
        const double a = analytic.tensors[t][e];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

SgdOptimizer::SgdOptimizer(const Network& network, double learning_rate, double momentum)
    : lr_(learning_rate), momentum_(momentum) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    for (const auto* p : network.parameters()) velocity_.emplace_back(p->size(), 0.0);
}

void SgdOptimizer::step(Network& network, const Gradients& grads) {
    auto params = network.parameters();
    for (std::size_t t = 0; t < params.size(); ++t)
        for (double g : grads.tensors[t].data())
            if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + network.parameter_owner(t));
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t]->data();
        auto g = grads.tensors[t].data();
        auto& v = velocity_[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = momentum_ * v[i] - lr_ * g[i];
            p[i] += v[i];
        }
    }
}

}  // namespace cpb
