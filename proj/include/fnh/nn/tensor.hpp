#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fnh/image.hpp"
#include "fnh/kernels.hpp"

namespace fnh::nn {

/// Planar C x H x W activation tensor.
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0)
      : c(channels), h(height), w(width), v(static_cast<std::size_t>(channels) * height * width, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return v.size(); }
  double& at(int ch, int y, int x) { return v[ch * plane() + static_cast<std::size_t>(y) * w + x]; }
  double at(int ch, int y, int x) const { return v[ch * plane() + static_cast<std::size_t>(y) * w + x]; }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

// Interleaved HWC image <-> planar tensor.
Tensor from_image(const ImagePlane& img);
ImagePlane to_image(const Tensor& t);
Tensor from_field(const ScalarField& f);
ScalarField to_field(const Tensor& t);
// Reorders an HWC gradient (e.g. from a loss) into CHW.
Tensor from_hwc(std::span<const double> hwc, int c, int h, int w);

// Same-padded stride-1 convolution. weight is [out][in][k][k].
Tensor conv2d(const Tensor& in, std::span<const double> weight, std::span<const double> bias, int out_channels,
              int kernel);
// Returns d(in); accumulates weight and bias gradients.
Tensor conv2d_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                       std::span<double> grad_weight, std::span<double> grad_bias, int kernel, bool need_input_grad);

// 2x2 stride-2 transposed convolution; weight is [out][in][2][2].
Tensor conv_transpose2x2(const Tensor& in, std::span<const double> weight, std::span<const double> bias,
                         int out_channels);
Tensor conv_transpose2x2_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                                  std::span<double> grad_weight, std::span<double> grad_bias);

void relu_inplace(Tensor& t);
// grad *= (out > 0)
void relu_backward_inplace(Tensor& grad, const Tensor& out);

Tensor avg_pool2(const Tensor& in);
Tensor avg_pool2_backward(const Tensor& grad_out);

Tensor upsample_nearest2(const Tensor& in);
Tensor upsample_nearest2_backward(const Tensor& grad_out);

Tensor concat_channels(const Tensor& a, const Tensor& b);
// Splits a concatenated gradient back into its two parts.
void split_channels(const Tensor& grad, int first_channels, Tensor& ga, Tensor& gb);

void add_inplace(Tensor& dst, const Tensor& src);

double softplus(double x);
double sigmoid(double x);
double softplus_inverse(double y);
inline double brelu(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace fnh::nn
