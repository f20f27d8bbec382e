#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cpb/dataset.hpp"
#include "cpb/rng.hpp"

namespace cpb::test {

inline PairInstance make_pair(std::string id, std::vector<double> x, std::vector<double> y, int label = 1,
                              AttributeKind xk = AttributeKind::Numerical,
                              AttributeKind yk = AttributeKind::Numerical) {
    PairInstance d;
    d.id = std::move(id);
    d.x = std::move(x);
    d.y = std::move(y);
    d.x_kind = xk;
    d.y_kind = yk;
    d.label = label;
    return d;
}

inline PairInstance random_pair(std::uint64_t seed, std::size_t n = 50, int label = 1) {
    Rng rng(seed);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = 0.5 * x[i] * x[i] + 0.3 * rng.normal();
    }
    return make_pair("r" + std::to_string(seed), x, y, label);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cpb_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace cpb::test
