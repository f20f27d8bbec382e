#include <doctest.h>

#include <cmath>
#include <set>

#include "cpb/dataset.hpp"
#include "cpb/error.hpp"
#include "cpb/features.hpp"
#include "cpb/synth.hpp"
#include "helpers.hpp"

using namespace cpb;
using cpb::test::make_pair;

namespace {

std::size_t index_of(const std::string& name) {
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    FAIL("no feature named " << name);
    return 0;
}

double feature(const FeatureVector& f, const std::string& name) { return f.values[index_of(name)]; }

std::vector<PairInstance> varied_instances() {
    std::vector<PairInstance> v;
    for (std::uint64_t s = 0; s < 8; ++s) {
        GenSpec g;
        g.mechanism = kMechanisms[s % 4];
        g.n_obs = 120;
        g.seed = s;
        auto d = generate(g);
        if (s % 4 == 1) d = discretize_instance(d, 5, 0);
        if (s % 4 == 2) d = discretize_instance(d, 2, 3);
        v.push_back(d);
    }
    return v;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("43 unique names") {
    CHECK(feature_count() == 43);
    const std::set<std::string> unique(feature_names().begin(), feature_names().end());
    CHECK(unique.size() == 43);
}

TEST_CASE("swap permutation is an involution that pairs directional names") {
    const auto& perm = swap_permutation();
    REQUIRE(perm.size() == 43);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[perm[i]] == i);
    CHECK(perm[index_of("x_std")] == index_of("y_std"));
    CHECK(perm[index_of("slope_y|x")] == index_of("slope_x|y"));
    CHECK(perm[index_of("igci_x->y")] == index_of("igci_y->x"));
    CHECK(perm[index_of("pearson")] == index_of("pearson"));
}

TEST_CASE("features of the swapped pair are the permuted features") {
    const auto& perm = swap_permutation();
    for (const auto& d : varied_instances()) {
        const auto f = extract_features(d);
        const auto g = extract_features(augment_swap(d));
        for (std::size_t i = 0; i < f.values.size(); ++i)
            CHECK_MESSAGE(g.values[i] == doctest::Approx(f.values[perm[i]]).epsilon(1e-9).scale(1.0),
                          feature_names()[i]);
    }
}

TEST_CASE("joint permutation of observations leaves features unchanged") {
    for (const auto& d : varied_instances()) {
        auto p = d;
        const auto idx = shuffled_indices(d.size(), 77);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            p.x[i] = d.x[idx[i]];
            p.y[i] = d.y[idx[i]];
        }
        const auto f = extract_features(d), g = extract_features(p);
        for (std::size_t i = 0; i < f.values.size(); ++i)
            CHECK_MESSAGE(g.values[i] == doctest::Approx(f.values[i]).epsilon(1e-9).scale(1.0), feature_names()[i]);
    }
}

TEST_CASE("exact linear relation") {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
        x.push_back(0.37 * i - 2);
        y.push_back(2 * x.back());
    }
    const auto f = extract_features(make_pair("lin", x, y));
    CHECK(feature(f, "pearson") == doctest::Approx(1.0));
    CHECK(feature(f, "spearman") == doctest::Approx(1.0));
    CHECK(feature(f, "lin_resid_var_y|x") == doctest::Approx(0.0).scale(1.0));
    CHECK(feature(f, "lin_resid_var_x|y") == doctest::Approx(0.0).scale(1.0));
    CHECK(feature(f, "slope_y|x") == doctest::Approx(2.0));
    CHECK(feature(f, "slope_x|y") == doctest::Approx(0.5));
}

TEST_CASE("constant attribute fallbacks") {
    const auto f = extract_features(make_pair("c", {4, 4, 4, 4, 4}, {1, 2, 3, 4, 5}));
    CHECK(feature(f, "x_std") == 0.0);
    CHECK(feature(f, "pearson") == 0.0);
    CHECK(feature(f, "spearman") == 0.0);
    for (double v : f.values) CHECK(std::isfinite(v));
}

TEST_CASE("degenerate inputs stay finite") {
    const std::vector<PairInstance> cases{
        make_pair("two", {0, 1}, {1, 0}),
        make_pair("same", {1, 1}, {1, 1}),
        make_pair("bin", {0, 1, 0, 1}, {1, 1, 1, 1}, 0, AttributeKind::Binary, AttributeKind::Binary),
        make_pair("huge", {1e300, -1e300, 0}, {1e-300, 0, -1e-300}),
    };
    for (const auto& d : cases) {
        const auto f = extract_features(d);
        REQUIRE(f.values.size() == 43);
        for (std::size_t i = 0; i < 43; ++i) CHECK_MESSAGE(std::isfinite(f.values[i]), d.id, " ", feature_names()[i]);
    }
    CHECK_THROWS_AS(extract_features(make_pair("one", {1}, {2})), ValidationError);
}

TEST_CASE("kind indicators and sample size") {
    const auto f = extract_features(make_pair("k", {0, 1, 1, 0}, {3, 4, 5, 6}, 0, AttributeKind::Binary));
    CHECK(feature(f, "x_bin") == 1.0);
    CHECK(feature(f, "x_num") == 0.0);
    CHECK(feature(f, "y_num") == 1.0);
    CHECK(feature(f, "log_n") == doctest::Approx(std::log(4.0)));
}

TEST_CASE("extract_all matches per-instance extraction and exports CSV") {
    const auto v = varied_instances();
    const auto all = extract_all(v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(all[i] == extract_features(v[i]));
    const auto csv = format_feature_matrix(v, all);
    CHECK(csv.rfind("id,log_n,x_num,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(v.size() + 1));
}

}
