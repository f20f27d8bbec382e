// OpenMP kernels. Work is split over output channels / units, so each
// output element is produced by one thread with a fixed summation order.

#include <algorithm>
#include <cstdlib>
#include <vector>

#include <omp.h>

#include "cpb/kernels.hpp"

namespace cpb::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;
}  // namespace

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) { omp_set_num_threads(std::max(1, n)); }

void apply_thread_env() {
    if (const char* env = std::getenv("CPB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) set_thread_count(std::min(cap, omp_get_max_threads()));
    }
}

namespace parallel {

void conv2d_forward(std::span<const double> x, Dims in, std::span<const double> w, std::span<const double> b,
                    std::size_t k_out, std::span<double> y) {
    const long H = static_cast<long>(in.h), W = static_cast<long>(in.w);
    const std::size_t plane = in.h * in.w;
    const bool go_parallel = k_out * in.c * plane * 9 > kParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
    for (long k = 0; k < static_cast<long>(k_out); ++k) {
        double* yk = y.data() + k * plane;
        std::fill(yk, yk + plane, b[k]);
        for (std::size_t c = 0; c < in.c; ++c) {
            const double* xc = x.data() + c * plane;
            for (long di = 0; di < 3; ++di)
                for (long dj = 0; dj < 3; ++dj) {
                    const double wv = w[((k * in.c + c) * 3 + di) * 3 + dj];
                    const long jlo = std::max(0L, 1 - dj), jhi = std::min(W, W + 1 - dj);
                    for (long i = 0; i < H; ++i) {
                        const long si = i + di - 1;
                        if (si < 0 || si >= H) continue;
                        const double* xr = xc + si * W + (dj - 1);
                        double* yr = yk + i * W;
                        for (long j = jlo; j < jhi; ++j) yr[j] += wv * xr[j];
                    }
                }
        }
    }
}

void conv2d_backward(std::span<const double> x, Dims in, std::span<const double> w, std::size_t k_out,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
    const long H = static_cast<long>(in.h), W = static_cast<long>(in.w);
    const std::size_t plane = in.h * in.w;
    const bool go_parallel = k_out * in.c * plane * 9 > kParallelWork;

#pragma omp parallel if (go_parallel)
    {
        std::vector<double> lanes(static_cast<std::size_t>(W));
#pragma omp for schedule(static)
        for (long k = 0; k < static_cast<long>(k_out); ++k) {
            const double* dyk = dy.data() + k * plane;
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += dyk[p];
            db[k] += acc;
            for (std::size_t c = 0; c < in.c; ++c) {
                const double* xc = x.data() + c * plane;
                for (long di = 0; di < 3; ++di)
                    for (long dj = 0; dj < 3; ++dj) {
                        const long jlo = std::max(0L, 1 - dj), jhi = std::min(W, W + 1 - dj);
                        std::fill(lanes.begin(), lanes.end(), 0.0);
                        for (long i = 0; i < H; ++i) {
                            const long si = i + di - 1;
                            if (si < 0 || si >= H) continue;
                            const double* xr = xc + si * W + (dj - 1);
                            const double* dr = dyk + i * W;
                            for (long j = jlo; j < jhi; ++j) lanes[j] += dr[j] * xr[j];
                        }
                        double g = 0.0;
                        for (long j = jlo; j < jhi; ++j) g += lanes[j];
                        dw[((k * in.c + c) * 3 + di) * 3 + dj] += g;
                    }
            }
        }
    }

    if (dx.empty()) return;
#pragma omp parallel for schedule(static) if (go_parallel)
    for (long c = 0; c < static_cast<long>(in.c); ++c) {
        double* dxc = dx.data() + c * plane;
        std::fill(dxc, dxc + plane, 0.0);
        for (std::size_t k = 0; k < k_out; ++k) {
            const double* dyk = dy.data() + k * plane;
            for (long di = 0; di < 3; ++di)
                for (long dj = 0; dj < 3; ++dj) {
                    const double wv = w[((k * in.c + c) * 3 + di) * 3 + dj];
                    const long jlo = std::max(0L, 1 - dj), jhi = std::min(W, W + 1 - dj);
                    for (long i = 0; i < H; ++i) {
                        const long si = i + di - 1;
                        if (si < 0 || si >= H) continue;
                        double* xr = dxc + si * W + (dj - 1);
                        const double* dr = dyk + i * W;
                        for (long j = jlo; j < jhi; ++j) xr[j] += wv * dr[j];
                    }
                }
        }
    }
}

void maxpool_forward(std::span<const double> x, Dims in, std::span<double> y, std::span<std::uint32_t> argmax) {
    const std::size_t oh = in.h / 2, ow = in.w / 2;
#pragma omp parallel for schedule(static) if (in.size() > kParallelWork)
    for (long c = 0; c < static_cast<long>(in.c); ++c)
        for (std::size_t i = 0; i < oh; ++i) {
            const std::size_t r0 = (c * in.h + 2 * i) * in.w, r1 = r0 + in.w;
            for (std::size_t j = 0; j < ow; ++j) {
                std::size_t best = r0 + 2 * j;
                if (x[r0 + 2 * j + 1] > x[best]) best = r0 + 2 * j + 1;
                if (x[r1 + 2 * j] > x[best]) best = r1 + 2 * j;
                if (x[r1 + 2 * j + 1] > x[best]) best = r1 + 2 * j + 1;
                const std::size_t o = (c * oh + i) * ow + j;
                y[o] = x[best];
                argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
}

void maxpool_backward(std::span<const double> dy, std::span<const std::uint32_t> argmax, std::span<double> dx) {
    // Windows do not overlap, so each dx element receives at most one contribution.
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
}

void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
    const std::size_t n = x.size();
    const double* xp = x.data();
#pragma omp parallel for schedule(static) if (y.size() * n > kParallelWork)
    for (long u = 0; u < static_cast<long>(y.size()); ++u) {
        const double* wr = w.data() + u * n;
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            a0 += wr[i] * xp[i];
            a1 += wr[i + 1] * xp[i + 1];
            a2 += wr[i + 2] * xp[i + 2];
            a3 += wr[i + 3] * xp[i + 3];
        }
        for (; i < n; ++i) a0 += wr[i] * xp[i];
        y[u] = ((a0 + a1) + (a2 + a3)) + b[u];
    }
}

void dense_backward(std::span<const double> x, std::span<const double> w, std::span<const double> dy,
                    std::span<double> dx, std::span<double> dw, std::span<double> db) {
    const std::size_t n = x.size();
    const std::size_t units = dy.size();
    const bool go_parallel = units * n > kParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
    for (long u = 0; u < static_cast<long>(units); ++u) {
        db[u] += dy[u];
        const double g = dy[u];
        double* wr = dw.data() + u * n;
        for (std::size_t i = 0; i < n; ++i) wr[i] += g * x[i];
    }
    if (dx.empty()) return;
    constexpr long kBlock = 256;
    const long blocks = (static_cast<long>(n) + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static) if (go_parallel)
    for (long blk = 0; blk < blocks; ++blk) {
        const std::size_t lo = blk * kBlock, hi = std::min(n, lo + kBlock);
        std::fill(dx.begin() + lo, dx.begin() + hi, 0.0);
        for (std::size_t u = 0; u < units; ++u) {
            const double g = dy[u];
            const double* wr = w.data() + u * n;
            for (std::size_t i = lo; i < hi; ++i) dx[i] += wr[i] * g;
        }
    }
}

}  // namespace parallel
}  // namespace cpb::kernels
