// Reference kernels: direct transcriptions of the layer definitions.

#include <algorithm>

#include "cpb/kernels.hpp"

namespace cpb::kernels::serial {

void conv2d_forward(std::span<const double> x, Dims in, std::span<const double> w, std::span<const double> b,
                    std::size_t k_out, std::span<double> y) {
    const auto H = static_cast<long>(in.h), W = static_cast<long>(in.w);
    for (std::size_t k = 0; k < k_out; ++k)
        for (long i = 0; i < H; ++i)
            for (long j = 0; j < W; ++j) {
                double acc = b[k];
                for (std::size_t c = 0; c < in.c; ++c)
                    for (long di = 0; di < 3; ++di)
                        for (long dj = 0; dj < 3; ++dj) {
                            const long si = i + di - 1, sj = j + dj - 1;
                            if (si < 0 || si >= H || sj < 0 || sj >= W) continue;
                            acc += w[((k * in.c + c) * 3 + di) * 3 + dj] * x[(c * in.h + si) * in.w + sj];
                        }
                y[(k * in.h + i) * in.w + j] = acc;
            }
}

void conv2d_backward(std::span<const double> x, Dims in, std::span<const double> w, std::size_t k_out,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
    const auto H = static_cast<long>(in.h), W = static_cast<long>(in.w);
    for (std::size_t k = 0; k < k_out; ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < in.h * in.w; ++p) acc += dy[k * in.h * in.w + p];
        db[k] += acc;
        for (std::size_t c = 0; c < in.c; ++c)
            for (long di = 0; di < 3; ++di)
                for (long dj = 0; dj < 3; ++dj) {
                    double g = 0.0;
                    for (long i = 0; i < H; ++i)
                        for (long j = 0; j < W; ++j) {
                            const long si = i + di - 1, sj = j + dj - 1;
                            if (si < 0 || si >= H || sj < 0 || sj >= W) continue;
                            g += dy[(k * in.h + i) * in.w + j] * x[(c * in.h + si) * in.w + sj];
                        }
                    dw[((k * in.c + c) * 3 + di) * 3 + dj] += g;
                }
    }
    if (dx.empty()) return;
    for (std::size_t c = 0; c < in.c; ++c)
        for (long si = 0; si < H; ++si)
            for (long sj = 0; sj < W; ++sj) {
                double acc = 0.0;
                for (std::size_t k = 0; k < k_out; ++k)
                    for (long di = 0; di < 3; ++di)
                        for (long dj = 0; dj < 3; ++dj) {
                            const long i = si - di + 1, j = sj - dj + 1;
                            if (i < 0 || i >= H || j < 0 || j >= W) continue;
                            acc += w[((k * in.c + c) * 3 + di) * 3 + dj] * dy[(k * in.h + i) * in.w + j];
                        }
                dx[(c * in.h + si) * in.w + sj] = acc;
            }
}

void maxpool_forward(std::span<const double> x, Dims in, std::span<double> y, std::span<std::uint32_t> argmax) {
    const std::size_t oh = in.h / 2, ow = in.w / 2;
    for (std::size_t c = 0; c < in.c; ++c)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                std::size_t best = (c * in.h + 2 * i) * in.w + 2 * j;
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = (c * in.h + 2 * i + di) * in.w + 2 * j + dj;
                        if (x[idx] > x[best]) best = idx;
                    }
                const std::size_t o = (c * oh + i) * ow + j;
                y[o] = x[best];
                argmax[o] = static_cast<std::uint32_t>(best);
            }
}

void maxpool_backward(std::span<const double> dy, std::span<const std::uint32_t> argmax, std::span<double> dx) {
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
}

void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
    const std::size_t n = x.size();
    for (std::size_t u = 0; u < y.size(); ++u) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += w[u * n + i] * x[i];
        y[u] = acc + b[u];
    }
}

void dense_backward(std::span<const double> x, std::span<const double> w, std::span<const double> dy,
                    std::span<double> dx, std::span<double> dw, std::span<double> db) {
    const std::size_t n = x.size();
    for (std::size_t u = 0; u < dy.size(); ++u) {
        db[u] += dy[u];
        for (std::size_t i = 0; i < n; ++i) dw[u * n + i] += dy[u] * x[i];
    }
    if (dx.empty()) return;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t u = 0; u < dy.size(); ++u) acc += w[u * n + i] * dy[u];
        dx[i] = acc;
    }
}

}  // namespace cpb::kernels::serial
