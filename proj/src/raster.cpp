#include "cpb/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "cpb/error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace cpb {

ScatterImage ScatterImage::transposed() const {
    ScatterImage t(m_);
    for (int r = 0; r < m_; ++r)
        for (int c = 0; c < m_; ++c) t.at(c, r) = at(r, c);
    return t;
}

std::vector<int> discretize(std::span<const double> values, int m, AttributeKind kind) {
    std::vector<int> bins(values.size(), 0);
    if (values.empty() || m < 1) return bins;
    if (kind != AttributeKind::Numerical) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto code = static_cast<long long>(values[i]);
            bins[i] = static_cast<int>(((code % m) + m) % m);
        }
        return bins;
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return bins;
    const double span = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double b = std::floor((values[i] - lo) / span * m);
        bins[i] = std::clamp(static_cast<int>(b), 0, m - 1);
    }
    return bins;
}

bool uses_frequency_mode(const PairInstance& d) {
    return d.x_kind != AttributeKind::Numerical && d.y_kind != AttributeKind::Numerical;
}

namespace {

// Pixel span [first, last) covered by bin b of an axis with `levels` bins.
// Non-numerical axes with fewer levels than m are enlarged by nearest neighbour.
struct AxisMap {
    int levels;
    int m;
    int first(int b) const { return static_cast<int>(static_cast<long long>(b) * m / levels); }
    int last(int b) const { return static_cast<int>(static_cast<long long>(b + 1) * m / levels); }
};

AxisMap axis_map(std::span<const double> values, AttributeKind kind, int m) {
    if (kind == AttributeKind::Numerical) return {m, m};
    if (kind == AttributeKind::Binary) return {std::min(2, m), m};
    double max_code = 0.0;
    for (double v : values) max_code = std::max(max_code, v);
    const auto levels = static_cast<long long>(max_code) + 1;
    return {static_cast<int>(std::min<long long>(levels, m)), m};
}

}  // namespace

ScatterImage rasterize(const PairInstance& d, const RasterConfig& config) {
    const int m = config.m;
    if (m < 2) throw ConfigError("raster side m must be >= 2, got " + std::to_string(m));
    const AxisMap ax = axis_map(d.x, d.x_kind, m);
    const AxisMap ay = axis_map(d.y, d.y_kind, m);
    const auto bx = discretize(d.x, ax.levels, d.x_kind);
    const auto by = discretize(d.y, ay.levels, d.y_kind);

    std::vector<std::uint32_t> counts(static_cast<std::size_t>(ax.levels) * ay.levels, 0);
    for (std::size_t i = 0; i < bx.size(); ++i) ++counts[static_cast<std::size_t>(by[i]) * ax.levels + bx[i]];

    std::vector<std::uint8_t> cell(counts.size(), 0);
    if (uses_frequency_mode(d)) {
        std::uint32_t fmin = UINT32_MAX, fmax = 0;
        for (auto c : counts)
            if (c > 0) {
                fmin = std::min(fmin, c);
                fmax = std::max(fmax, c);
            }
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] == 0) continue;
            if (fmax == fmin) {
                cell[i] = 255;
            } else {
                const double t = static_cast<double>(counts[i] - fmin) / static_cast<double>(fmax - fmin);
                cell[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
            }
        }
    } else {
        for (std::size_t i = 0; i < counts.size(); ++i) cell[i] = counts[i] > 0 ? 255 : 0;
    }

    ScatterImage img(m);
    for (int yb = 0; yb < ay.levels; ++yb)
        for (int xb = 0; xb < ax.levels; ++xb) {
            const auto v = cell[static_cast<std::size_t>(yb) * ax.levels + xb];
            if (v == 0) continue;
            for (int r = ay.first(yb); r < ay.last(yb); ++r)
                for (int c = ax.first(xb); c < ax.last(xb); ++c) img.at(r, c) = v;
        }
    return img;
}

std::string encode_pgm(const ScatterImage& image) {
    const int m = image.side();
    std::string out = "P5\n" + std::to_string(m) + " " + std::to_string(m) + "\n255\n";
    const auto header = out.size();
    out.resize(header + static_cast<std::size_t>(m) * m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
            out[header + static_cast<std::size_t>(r) * m + c] = static_cast<char>(255 - image.at(m - 1 - r, c));
    return out;
}

ScatterImage decode_pgm(std::string_view bytes, const std::string& name) {
    // Header fields are separated by single whitespace characters as written by encode_pgm.
    std::size_t pos = 0;
    const auto next_token = [&]() -> std::string_view {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        const auto start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    if (next_token() != "P5") throw ParseError(name, 1, "not a binary greymap (missing P5)");
    const auto w = text::parse_int(next_token());
    const auto h = text::parse_int(next_token());
    const auto maxval = text::parse_int(next_token());
    if (!w || !h || *w != *h || *w < 1) throw ParseError(name, 2, "expected square dimensions");
    if (!maxval || *maxval != 255) throw ParseError(name, 3, "expected maxval 255");
    ++pos;  // single whitespace after maxval
    const auto m = static_cast<int>(*w);
    if (bytes.size() - std::min(pos, bytes.size()) != static_cast<std::size_t>(m) * m)
        throw ParseError(name, 4, "payload size does not match " + std::to_string(m) + "x" + std::to_string(m));
    ScatterImage img(m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
            img.at(m - 1 - r, c) =
                static_cast<std::uint8_t>(255 - static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(r) * m + c]));
    return img;
}

void write_image(const ScatterImage& image, const std::filesystem::path& path) {
    io::write_file(path, encode_pgm(image));
}

ScatterImage read_image(const std::filesystem::path& path) {
    return decode_pgm(io::read_file(path), path.string());
}

}  // namespace cpb
