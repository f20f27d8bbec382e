#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cpb/dataset.hpp"

namespace cpb {

struct RasterConfig {
    int m = 200;  ///< bins per axis == image side in pixels
};

/// Square greyscale scatter image.
///
/// Pixel values are darkness: 0 is white, 255 the darkest mark. Storage is
/// row-major with row index = y bin (row 0 holds the lowest y values) and
/// column index = x bin, so exchanging x and y is an exact matrix transpose.
class ScatterImage {
public:
    ScatterImage() = default;
    explicit ScatterImage(int m) : m_(m), pixels_(static_cast<std::size_t>(m) * m, 0) {}

    int side() const noexcept { return m_; }
    std::uint8_t at(int row, int col) const { return pixels_[static_cast<std::size_t>(row) * m_ + col]; }
    std::uint8_t& at(int row, int col) { return pixels_[static_cast<std::size_t>(row) * m_ + col]; }
    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    ScatterImage transposed() const;

    bool operator==(const ScatterImage&) const = default;

private:
    int m_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Bin index per value in [0, m-1].
///
/// Numerical: min-max equal-width bins, the maximum falls in the last bin,
/// a constant vector maps to bin 0. Categorical/binary: code k -> bin k,
/// codes >= m wrap modulo m.
std::vector<int> discretize(std::span<const double> values, int m,
                            AttributeKind kind = AttributeKind::Numerical);

/// True when the pair is rendered by normalized frequency (neither attribute numerical).
bool uses_frequency_mode(const PairInstance& instance);

ScatterImage rasterize(const PairInstance& instance, const RasterConfig& config);

/// Greymap bytes: "P5\n<m> <m>\n255\n" then m*m bytes, top row (highest y) first.
/// File bytes are inverted (255 - darkness) so marks render dark on white.
std::string encode_pgm(const ScatterImage& image);
ScatterImage decode_pgm(std::string_view bytes, const std::string& name = "image");

void write_image(const ScatterImage& image, const std::filesystem::path& path);
ScatterImage read_image(const std::filesystem::path& path);

}  // namespace cpb
