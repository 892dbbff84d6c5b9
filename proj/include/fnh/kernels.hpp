#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// plain reference used by tests, `omp` is the production version. Both
// compute each output element with the same operation order, so their
// results are identical regardless of thread count.

#include <cstddef>
#include <span>

namespace fnh::kernels {

/// Geometry of a same-padded, stride-1 square convolution over CHW tensors.
struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 3;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  std::size_t in_size() const { return static_cast<std::size_t>(in_channels) * height * width; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_channels) * height * width; }
};

// Pairwise (cascade) summation with a fixed split, independent of threads.
double pairwise_sum(std::span<const double> values);

namespace serial {

// I = J t + A (1 - t), t = exp(-beta d); J and A are H*W*C interleaved,
// beta and depth are H*W.
void synthesize(std::span<const double> clean, std::span<const double> alf, std::span<const double> beta,
                std::span<const double> depth, int channels, std::span<double> hazy);

// J = (I - A) exp(beta d) + A, unclamped.
void dehaze(std::span<const double> hazy, std::span<const double> alf, std::span<const double> beta,
            std::span<const double> depth, int channels, std::span<double> clean);

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);
// Accumulates into grad_in.
void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weight,
                           std::span<double> grad_in);
// Accumulates into grad_weight and grad_bias.
void conv2d_backward_weight(const ConvShape& s, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_weight, std::span<double> grad_bias);

}  // namespace serial

namespace omp {

void synthesize(std::span<const double> clean, std::span<const double> alf, std::span<const double> beta,
                std::span<const double> depth, int channels, std::span<double> hazy);
void dehaze(std::span<const double> hazy, std::span<const double> alf, std::span<const double> beta,
            std::span<const double> depth, int channels, std::span<double> clean);

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);
void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weight,
                           std::span<double> grad_in);
void conv2d_backward_weight(const ConvShape& s, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_weight, std::span<double> grad_bias);

}  // namespace omp

}  // namespace fnh::kernels
