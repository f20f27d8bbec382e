#include <doctest.h>

#include <cmath>
#include <limits>

#include "cpb/error.hpp"
#include "cpb/network.hpp"
#include "cpb/rng.hpp"

using namespace cpb;

namespace {

Tensor random_input(std::vector<std::size_t> shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.values()) v = rng.uniform(-1, 1);
    return t;
}

Network tiny_cnn(std::uint64_t seed) {
    return Network({1, 8, 8},
                   {layer::Conv{3}, layer::Relu{}, layer::Conv{4}, layer::Relu{}, layer::MaxPool{}, layer::Dense{3},
                    layer::Softmax{}},
                   seed);
}

Network linear_net(std::size_t n, std::uint64_t seed) { return Network({1, 1, n}, {layer::Dense{3}, layer::Softmax{}}, seed); }

}  // namespace

TEST_SUITE("network") {

TEST_CASE("construction requires a trailing softmax") {
    CHECK_THROWS_AS(Network({1, 4, 4}, {layer::Dense{3}}, 0), ConfigError);
    const auto net = tiny_cnn(1);
    CHECK(net.output_size() == 3);
    CHECK(net.layers()[0].name == "conv1");
    CHECK(net.parameter_count() == (3 * 9 + 3) + (4 * 3 * 9 + 4) + (3 * 64 + 3));
}

TEST_CASE("He-uniform initialization stays within its limit") {
    const auto net = tiny_cnn(3);
    const auto& conv2 = net.layers()[2];
    const double limit = std::sqrt(6.0 / (3 * 9));
    for (double w : conv2.weights.values()) CHECK(std::abs(w) <= limit);
    for (double b : conv2.bias.values()) CHECK(b == 0.0);
    CHECK(tiny_cnn(3) == net);
    CHECK_FALSE(tiny_cnn(4) == net);
}

TEST_CASE("gradient check on a small convolutional net") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto net = tiny_cnn(seed);
        const auto x = random_input({1, 8, 8}, seed + 10);
        const double err = gradient_check(net, x, seed % 3, {1e-5, 200, seed});
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("gradient check on a linear layer is at round-off level") {
    const auto net = linear_net(6, 2);
    const double err = gradient_check(net, random_input({1, 1, 6}, 3), 1, {1e-5, 200, 0});
    CHECK(err <= 1e-9);
}

TEST_CASE("gradient check rejects epsilon outside its range") {
    const auto net = linear_net(4, 1);
    const auto x = random_input({1, 1, 4}, 1);
    CHECK_THROWS_AS(gradient_check(net, x, 0, {0.0}), ConfigError);
    CHECK_THROWS_AS(gradient_check(net, x, 0, {1e-3}), ConfigError);
}

TEST_CASE("dense + softmax gradient is (p - onehot) outer input") {
    const auto net = linear_net(5, 7);
    const auto x = random_input({1, 1, 5}, 8);
    const auto p = net.predict(x);
    const auto r = backward(net, x, 2);
    const auto& dw = r.parameters.tensors[0];
    const auto& db = r.parameters.tensors[1];
    for (std::size_t k = 0; k < 3; ++k) {
        const double g = p[k] - (k == 2 ? 1.0 : 0.0);
        CHECK(db[k] == doctest::Approx(g).epsilon(1e-9));
        for (std::size_t j = 0; j < 5; ++j) CHECK(dw[k * 5 + j] == doctest::Approx(g * x[j]).epsilon(1e-9));
    }
}

TEST_CASE("input gradient matches central differences") {
    const auto net = tiny_cnn(5);
    auto x = random_input({1, 8, 8}, 6);
    const auto r = backward(net, x, 1);
    for (std::size_t i = 0; i < x.size(); i += 7) {
        const double saved = x[i];
        x[i] = saved + 1e-6;
        const double lp = net.loss(x, 1);
        x[i] = saved - 1e-6;
        const double lm = net.loss(x, 1);
        x[i] = saved;
        const double num = (lp - lm) / 2e-6;
        CHECK(std::abs(num - r.input[i]) <= 1e-6 * std::max({1.0, std::abs(num)}));
    }
}

TEST_CASE("zero input gives zero kernel gradients and nonzero bias gradients") {
    const Network net({1, 4, 4}, {layer::Conv{2}, layer::Dense{3}, layer::Softmax{}}, 9);
    const auto r = backward(net, Tensor({1, 4, 4}), 0);
    for (double g : r.parameters.tensors[0].values()) CHECK(g == 0.0);
    double bias_norm = 0;
    for (double g : r.parameters.tensors[1].values()) bias_norm += std::abs(g);
    CHECK(bias_norm > 0);
}

TEST_CASE("serial and parallel backends agree") {
    auto a = tiny_cnn(11);
    auto b = a;
    a.set_backend(kernels::Backend::Serial);
    b.set_backend(kernels::Backend::Parallel);
    const auto x = random_input({1, 8, 8}, 12);
    const auto pa = a.predict(x), pb = b.predict(x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
    const auto ga = backward(a, x, 2), gb = backward(b, x, 2);
    for (std::size_t i = 0; i < ga.input.size(); ++i)
        CHECK(ga.input[i] == doctest::Approx(gb.input[i]).epsilon(1e-10));
    for (std::size_t i = 0; i < ga.parameters.tensors.size(); ++i)
        for (std::size_t j = 0; j < ga.parameters.tensors[i].size(); ++j)
            CHECK(ga.parameters.tensors[i][j] == doctest::Approx(gb.parameters.tensors[i][j]).epsilon(1e-12));
}

TEST_CASE("sgd step arithmetic") {
    auto net = linear_net(2, 1);
    const auto before = net;
    auto g = net.zero_gradients();
    for (auto& t : g.tensors) t.fill(1.0);

    SgdOptimizer plain(net, 0.1, 0.0);
    plain.step(net, g);
    for (std::size_t i = 0; i < net.layers()[0].weights.size(); ++i)
        CHECK(net.layers()[0].weights[i] == doctest::Approx(before.layers()[0].weights[i] - 0.1));

    auto still = before;
    SgdOptimizer zero(still, 0.1, 0.9);
    zero.step(still, still.zero_gradients());
    CHECK(still == before);

    auto m = before;
    SgdOptimizer mom(m, 0.1, 0.9);
    auto g2 = m.zero_gradients();
    for (auto& t : g2.tensors) t.fill(0.5);
    mom.step(m, g);   // v1 = -0.1
    mom.step(m, g2);  // v2 = 0.9 * -0.1 - 0.05 = -0.14
    const double w0 = before.layers()[0].weights[0];
    CHECK(m.layers()[0].weights[0] == doctest::Approx(w0 - 0.1 - 0.14).epsilon(1e-12));
}

TEST_CASE("sgd validates its configuration and gradients") {
    auto net = tiny_cnn(1);
    CHECK_THROWS_AS(SgdOptimizer(net, 0.0, 0.5), ConfigError);
    CHECK_THROWS_AS(SgdOptimizer(net, 0.1, 1.0), ConfigError);
    CHECK_THROWS_AS(SgdOptimizer(net, 0.1, -0.1), ConfigError);
    SgdOptimizer opt(net, 0.1, 0.0);
    auto g = net.zero_gradients();
    g.tensors[2][0] = std::numeric_limits<double>::quiet_NaN();
    try {
        opt.step(net, g);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("conv2") != std::string::npos);
    }
}

TEST_CASE("loss on a fixed batch does not increase under small-step SGD") {
    auto net = tiny_cnn(21);
    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;
    for (std::uint64_t i = 0; i < 6; ++i) {
        xs.push_back(random_input({1, 8, 8}, 100 + i));
        ys.push_back(i % 3);
    }
    const auto batch_loss = [&] {
        double s = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) s += net.loss(xs[i], ys[i]);
        return s / static_cast<double>(xs.size());
    };
    SgdOptimizer opt(net, 1e-4, 0.0);
    double prev = batch_loss();
    const double first = prev;
    for (int step = 0; step < 50; ++step) {
        auto g = net.zero_gradients();
        for (std::size_t i = 0; i < xs.size(); ++i) net.backward(net.forward(xs[i]), ys[i], g);
        g.scale(1.0 / static_cast<double>(xs.size()));
        opt.step(net, g);
        const double cur = batch_loss();
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
    CHECK(prev < first);
}

TEST_CASE("serialization round-trips and rejects damage") {
    const auto net = tiny_cnn(31);
    const auto bytes = net.serialize();
    CHECK(bytes.substr(0, 4) == "CPBN");
    const auto back = Network::deserialize(bytes);
    CHECK(back == net);
    CHECK(back.serialize() == bytes);
    CHECK_THROWS(Network::deserialize(bytes.substr(0, bytes.size() - 3)));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(Network::deserialize(bad));
}

}
