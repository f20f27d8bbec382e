#pragma once

// Raw forward/backward kernels for the CNN layers.
//
// `serial` holds the textbook reference loops; `parallel` holds the
// OpenMP versions used for training. Both compute every output element
// with a fixed summation order that does not depend on the thread count,
// so results are reproducible across machines with the same build.
// The parallel dense forward and convolution weight gradient use a
// different (blocked) summation order than the reference, so they agree
// with it up to rounding; every other kernel matches it bit for bit.
// Backward kernels accumulate (+=) into dw/db; dx is overwritten and may
// be empty when the input gradient is not needed.

#include <cstddef>
#include <cstdint>
#include <span>

namespace cpb::kernels {

struct Dims {
    std::size_t c, h, w;
    std::size_t size() const noexcept { return c * h * w; }
};

#define CPB_KERNEL_DECLS                                                                                 \
    void conv2d_forward(std::span<const double> x, Dims in, std::span<const double> w,                  \
                        std::span<const double> b, std::size_t k, std::span<double> y);                  \
    void conv2d_backward(std::span<const double> x, Dims in, std::span<const double> w, std::size_t k,   \
                         std::span<const double> dy, std::span<double> dx, std::span<double> dw,         \
                         std::span<double> db);                                                          \
    void maxpool_forward(std::span<const double> x, Dims in, std::span<double> y,                       \
                         std::span<std::uint32_t> argmax);                                               \
    void maxpool_backward(std::span<const double> dy, std::span<const std::uint32_t> argmax,             \
                          std::span<double> dx);                                                         \
    void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b, \
                       std::span<double> y);                                                             \
    void dense_backward(std::span<const double> x, std::span<const double> w, std::span<const double> dy, \
                        std::span<double> dx, std::span<double> dw, std::span<double> db);

namespace serial {
CPB_KERNEL_DECLS
}  // namespace serial

namespace parallel {
CPB_KERNEL_DECLS
}  // namespace parallel

#undef CPB_KERNEL_DECLS

enum class Backend { Serial, Parallel };

/// Worker count used by the parallel kernels (honours CPB_THREADS).
int thread_count();
void set_thread_count(int n);
/// Applies the CPB_THREADS cap to the OpenMP runtime, if set.
void apply_thread_env();

}  // namespace cpb::kernels
