#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cpb/dataset.hpp"
#include "cpb/error.hpp"
#include "cpb/synth.hpp"
#include "helpers.hpp"

using namespace cpb;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1 - 6 * d2 / (n * (n * n - 1));
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("labels follow the mechanism and the swap coin") {
    for (std::uint64_t s = 0; s < 40; ++s) {
        for (auto m : kMechanisms) {
            GenSpec g;
            g.mechanism = m;
            g.seed = s;
            g.n_obs = 50;
            const auto d = generate(g);
            validate(d);
            const bool causal = m == Mechanism::AdditiveNoiseNonlinear || m == Mechanism::LinearNonGaussian;
            if (causal)
                CHECK(std::abs(d.label) == 1);
            else
                CHECK(d.label == 0);
            CHECK(d.size() == 50);
        }
    }
}

TEST_CASE("generation is a pure function of the spec") {
    GenSpec g;
    g.seed = 17;
    CHECK(generate(g) == generate(g));
    auto h = g;
    h.seed = 18;
    CHECK_FALSE(generate(h) == generate(g));
}

TEST_CASE("outputs are standardized") {
    GenSpec g;
    g.n_obs = 400;
    for (auto m : kMechanisms) {
        g.mechanism = m;
        const auto d = generate(g);
        for (const auto* v : {&d.x, &d.y}) {
            double mean = 0, var = 0;
            for (double a : *v) mean += a;
            mean /= 400;
            for (double a : *v) var += (a - mean) * (a - mean);
            var /= 400;
            CHECK(std::abs(mean) < 1e-12);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("vanishing noise with a monotone sigmoid gives near-perfect rank correlation") {
    GenSpec g;
    g.mechanism = Mechanism::AdditiveNoiseNonlinear;
    g.family = FunctionFamily::Sigmoid;
    g.noise_scale = 1e-9;
    g.n_obs = 300;
    for (std::uint64_t s = 0; s < 5; ++s) {
        g.seed = s;
        const auto d = generate(g);
        CHECK(std::abs(spearman(d.x, d.y)) > 0.999);
    }
}

TEST_CASE("forced swap matches augment_swap of the unswapped instance") {
    for (auto m : kMechanisms) {
        GenSpec g;
        g.mechanism = m;
        g.seed = 5;
        g.force_swap = false;
        const auto plain = generate(g);
        g.force_swap = true;
        const auto swapped = generate(g);
        const auto mirrored = augment_swap(plain);
        CHECK(swapped.x == mirrored.x);
        CHECK(swapped.y == mirrored.y);
        CHECK(swapped.label == mirrored.label);
        CHECK(swapped.x_kind == mirrored.x_kind);
    }
}

TEST_CASE("spec validation") {
    GenSpec g;
    g.n_obs = 1;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.n_obs = 10;
    g.noise_scale = 0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("benchmark mechanism allocation is exact") {
    CHECK(allocate_mix(100, {0.5, 0.0, 0.5, 0.0}) == std::array<int, 4>{50, 0, 50, 0});
    CHECK(allocate_mix(10, {0.25, 0.25, 0.25, 0.25}) == std::array<int, 4>{3, 3, 2, 2});
    BenchmarkSpec spec;
    spec.count = 100;
    spec.mix = {0.5, 0.0, 0.5, 0.0};
    spec.min_obs = spec.max_obs = 100;
    const auto mech = benchmark_mechanisms(spec);
    CHECK(std::count(mech.begin(), mech.end(), Mechanism::AdditiveNoiseNonlinear) == 50);
    CHECK(std::count(mech.begin(), mech.end(), Mechanism::Independent) == 50);
    const auto data = generate_benchmark(spec);
    for (const auto& d : data) CHECK(d.size() == 100);
    CHECK(data.front().id == "syn00000");
    spec.mix = {0.5, 0.1, 0.5, 0.0};
    CHECK_THROWS_AS(generate_benchmark(spec), ConfigError);
}

TEST_CASE("direction coin is balanced") {
    BenchmarkSpec spec;
    spec.count = 4000;
    spec.mix = {0.5, 0.5, 0.0, 0.0};
    spec.min_obs = spec.max_obs = 10;
    spec.seed = 3;
    const auto data = generate_benchmark(spec);
    const double pos = static_cast<double>(std::count_if(data.begin(), data.end(), [](auto& d) { return d.label == 1; }));
    // Binomial(4000, 0.5): 3 sigma is about 95.
    CHECK(std::abs(pos - 2000) < 95);
}

TEST_CASE("observation counts are drawn from the range") {
    BenchmarkSpec spec;
    spec.count = 200;
    spec.min_obs = 20;
    spec.max_obs = 40;
    const auto data = generate_benchmark(spec);
    std::size_t lo = 1000, hi = 0;
    for (const auto& d : data) {
        lo = std::min(lo, d.size());
        hi = std::max(hi, d.size());
    }
    CHECK(lo >= 20);
    CHECK(hi <= 40);
    CHECK(hi > lo);
    CHECK(generate_benchmark(spec) == data);
}

TEST_CASE("discretization post-step") {
    const auto d = cpb::test::random_pair(3, 200);
    const auto b = discretize_instance(d, 2, 0);
    CHECK(b.x_kind == AttributeKind::Binary);
    CHECK(b.y_kind == AttributeKind::Numerical);
    CHECK(b.y == d.y);
    for (double v : b.x) CHECK((v == 0 || v == 1));
    const auto c = discretize_instance(d, 5, 4);
    CHECK(c.x_kind == AttributeKind::Categorical);
    CHECK(c.x[0] == 0);
    CHECK(*std::max_element(c.x.begin(), c.x.end()) <= 4);
    validate(c);
}

TEST_CASE("benchmark round-trips through the three-file format") {
    const auto dir = cpb::test::temp_dir("synth_files");
    BenchmarkSpec spec;
    spec.count = 30;
    spec.min_obs = spec.max_obs = 25;
    auto data = generate_benchmark(spec);
    data[3] = discretize_instance(data[3], 3, 2);
    const PairFiles files{dir / "p.csv", dir / "i.csv", dir / "t.csv"};
    write_pairs(data, files);
    CHECK(read_pairs(files) == data);
}

}
