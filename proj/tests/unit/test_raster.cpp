#include <doctest.h>

#include <algorithm>

#include "cpb/dataset.hpp"
#include "cpb/error.hpp"
#include "cpb/raster.hpp"
#include "cpb/rng.hpp"
#include "cpb/synth.hpp"
#include "helpers.hpp"

using namespace cpb;
using cpb::test::make_pair;

namespace {

PairInstance binary_pair(int c00, int c01, int c10, int c11) {
    PairInstance d = make_pair("b", {}, {}, 0, AttributeKind::Binary, AttributeKind::Binary);
    const auto add = [&](int x, int y, int n) {
        for (int i = 0; i < n; ++i) {
            d.x.push_back(x);
            d.y.push_back(y);
        }
    };
    add(0, 0, c00);
    add(0, 1, c01);
    add(1, 0, c10);
    add(1, 1, c11);
    return d;
}

ScatterImage random_image(int m, std::uint64_t seed) {
    Rng rng(seed);
    ScatterImage img(m);
    for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.uniform_int(256));
    return img;
}

}  // namespace

TEST_SUITE("raster") {

TEST_CASE("discretize binning rule") {
    CHECK(discretize(std::vector<double>{0, 0.5, 1}, 2) == std::vector<int>{0, 1, 1});
    CHECK(discretize(std::vector<double>{3, 3, 3, 3}, 7) == std::vector<int>{0, 0, 0, 0});
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) v.push_back(i);
    std::vector<int> want{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(discretize(v, 10) == want);
    CHECK(discretize(std::vector<double>{0, 1, 2, 5}, 3, AttributeKind::Categorical) == std::vector<int>{0, 1, 2, 2});
}

TEST_CASE("discretize matches the floor formula on random data") {
    Rng rng(11);
    std::vector<double> v(500);
    for (auto& x : v) x = rng.normal();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    for (int m : {2, 13, 200}) {
        const auto b = discretize(v, m);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const int want = std::min(static_cast<int>(std::floor((v[i] - *lo) / (*hi - *lo) * m)), m - 1);
            CHECK(b[i] == want);
        }
    }
}

TEST_CASE("frequency mode normalizes over occupied cells") {
    const auto img = rasterize(binary_pair(40, 10, 10, 40), {2});
    CHECK(uses_frequency_mode(binary_pair(1, 1, 1, 1)));
    // row = y bin (row 0 at the bottom), column = x bin
    CHECK(img.at(0, 0) == 255);
    CHECK(img.at(1, 1) == 255);
    CHECK(img.at(1, 0) == 0);
    CHECK(img.at(0, 1) == 0);

    const auto mid = rasterize(binary_pair(40, 20, 10, 0), {2});
    CHECK(mid.at(0, 0) == 255);
    CHECK(mid.at(1, 0) == 85);  // round(255 * (20 - 10) / 30)
    CHECK(mid.at(0, 1) == 0);
    CHECK(mid.at(1, 1) == 0);  // unoccupied

    const auto flat = rasterize(binary_pair(5, 5, 0, 5), {2});
    CHECK(flat.at(0, 0) == 255);
    CHECK(flat.at(1, 0) == 255);
    CHECK(flat.at(1, 1) == 255);
    CHECK(flat.at(0, 1) == 0);
}

TEST_CASE("frequency mode enlarges k x k cells to the canvas") {
    const auto img = rasterize(binary_pair(3, 1, 0, 2), {4});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const int want = r < 2 ? (c < 2 ? 255 : 0) : (c < 2 ? 0 : 128);
            CHECK(img.at(r, c) == want);
        }
}

TEST_CASE("occupancy mode marks the diagonal") {
    const auto d = make_pair("d", {0, 1, 2, 3}, {0, 1, 2, 3});
    const auto img = rasterize(d, {4});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) CHECK(img.at(r, c) == (r == c ? 255 : 0));
}

TEST_CASE("occupancy mode only emits 0 or 255, also for mixed pairs") {
    auto d = cpb::test::random_pair(4, 300);
    auto mixed = discretize_instance(d, 0, 5);
    for (const auto& inst : {d, mixed}) {
        CHECK_FALSE(uses_frequency_mode(inst));
        const auto img = rasterize(inst, {32});
        for (auto p : img.pixels()) CHECK((p == 0 || p == 255));
    }
}

TEST_CASE("swap rasterizes to the transpose") {
    for (std::uint64_t s = 0; s < 12; ++s) {
        auto d = cpb::test::random_pair(s, 200);
        if (s % 3 == 1) d = discretize_instance(d, 4, 3);
        if (s % 3 == 2) d = discretize_instance(d, 0, 2);
        for (int m : {8, 50}) CHECK(rasterize(augment_swap(d), {m}) == rasterize(d, {m}).transposed());
    }
}

TEST_CASE("joint permutation of observations leaves the image unchanged") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto d = cpb::test::random_pair(s, 150);
        if (s % 2) d = discretize_instance(d, 3, 4);
        auto p = d;
        const auto idx = shuffled_indices(d.size(), s + 100);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            p.x[i] = d.x[idx[i]];
            p.y[i] = d.y[idx[i]];
        }
        CHECK(rasterize(p, {40}) == rasterize(d, {40}));
    }
}

TEST_CASE("greymap encoding") {
    ScatterImage img(2);
    img.at(1, 0) = 0;
    img.at(1, 1) = 255;
    img.at(0, 0) = 255;
    img.at(0, 1) = 0;
    const auto bytes = encode_pgm(img);
    CHECK(bytes.substr(0, 11) == "P5\n2 2\n255\n");
    CHECK(bytes.size() == 11 + 4);
    // top row first, inverted
    CHECK(static_cast<unsigned char>(bytes[11]) == 255);
    CHECK(static_cast<unsigned char>(bytes[12]) == 0);
    CHECK(static_cast<unsigned char>(bytes[13]) == 0);
    CHECK(static_cast<unsigned char>(bytes[14]) == 255);
    CHECK(decode_pgm(bytes) == img);

    ScatterImage blank(3);
    const auto b = encode_pgm(blank);
    CHECK(std::all_of(b.begin() + 11, b.end(), [](char c) { return static_cast<unsigned char>(c) == 255; }));
}

TEST_CASE("greymap files round-trip") {
    const auto dir = cpb::test::temp_dir("raster_io");
    for (int m : {2, 7, 64}) {
        const auto img = random_image(m, static_cast<std::uint64_t>(m));
        write_image(img, dir / ("img" + std::to_string(m) + ".pgm"));
        CHECK(read_image(dir / ("img" + std::to_string(m) + ".pgm")) == img);
    }
    CHECK_THROWS_AS(read_image(dir / "missing.pgm"), IoError);
    CHECK_THROWS(decode_pgm("P5\n2 2\n255\n\x01"));
    CHECK_THROWS(decode_pgm("P2\n1 1\n255\n\x01"));
}

TEST_CASE("transposed is an involution") {
    const auto img = random_image(9, 3);
    CHECK(img.transposed().transposed() == img);
    CHECK(img.transposed().at(2, 5) == img.at(5, 2));
}

}
