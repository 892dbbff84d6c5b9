#include <algorithm>
#include <cmath>

#include "fnh/error.hpp"
#include "fnh/nn/tensor.hpp"

namespace fnh::nn {

Tensor from_image(const ImagePlane& img) {
  Tensor t(img.channels(), img.height(), img.width());
  const std::size_t n = img.pixels();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < img.channels(); ++c) t.v[c * n + p] = img[p * img.channels() + c];
  }
  return t;
}

ImagePlane to_image(const Tensor& t) {
  ImagePlane img(t.h, t.w, t.c);
  const std::size_t n = t.plane();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < t.c; ++c) img[p * t.c + c] = t.v[c * n + p];
  }
  return img;
}

Tensor from_field(const ScalarField& f) {
  Tensor t(1, f.height(), f.width());
  std::copy(f.data().begin(), f.data().end(), t.v.begin());
  return t;
}

ScalarField to_field(const Tensor& t) {
  if (t.c != 1) throw InvalidArgument("to_field: tensor has more than one channel");
  return ScalarField(t.h, t.w, t.v);
}

Tensor from_hwc(std::span<const double> hwc, int c, int h, int w) {
  Tensor t(c, h, w);
  const std::size_t n = t.plane();
  for (std::size_t p = 0; p < n; ++p) {
    for (int ch = 0; ch < c; ++ch) t.v[ch * n + p] = hwc[p * c + ch];
  }
  return t;
}

Tensor conv2d(const Tensor& in, std::span<const double> weight, std::span<const double> bias, int out_channels,
              int kernel) {
  const kernels::ConvShape s{in.c, out_channels, in.h, in.w, kernel};
  Tensor out(out_channels, in.h, in.w);
  kernels::omp::conv2d_forward(s, in.v, weight, bias, out.v);
  return out;
}

Tensor conv2d_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                       std::span<double> grad_weight, std::span<double> grad_bias, int kernel, bool need_input_grad) {
  const kernels::ConvShape s{in.c, grad_out.c, in.h, in.w, kernel};
  kernels::omp::conv2d_backward_weight(s, grad_out.v, in.v, grad_weight, grad_bias);
  if (!need_input_grad) return {};
  Tensor gin(in.c, in.h, in.w);
  kernels::omp::conv2d_backward_input(s, grad_out.v, weight, gin.v);
  return gin;
}

Tensor conv_transpose2x2(const Tensor& in, std::span<const double> weight, std::span<const double> bias,
                         int out_channels) {
  Tensor out(out_channels, 2 * in.h, 2 * in.w);
  const std::size_t ip = in.plane();
#pragma omp parallel for schedule(static)
  for (int co = 0; co < out_channels; ++co) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        const int ky = y & 1;
        const int kx = x & 1;
        const std::size_t src = static_cast<std::size_t>(y >> 1) * in.w + (x >> 1);
        double acc = bias[co];
        for (int ci = 0; ci < in.c; ++ci) {
          acc += weight[((static_cast<std::size_t>(co) * in.c + ci) * 2 + ky) * 2 + kx] * in.v[ci * ip + src];
        }
        out.at(co, y, x) = acc;
      }
    }
  }
  return out;
}

Tensor conv_transpose2x2_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                                  std::span<double> grad_weight, std::span<double> grad_bias) {
  const int co_n = grad_out.c;
  const std::size_t ip = in.plane();
#pragma omp parallel for schedule(static)
  for (int co = 0; co < co_n; ++co) {
    double bacc = 0.0;
    for (std::size_t i = co * grad_out.plane(); i < (co + 1) * grad_out.plane(); ++i) bacc += grad_out.v[i];
    grad_bias[co] += bacc;
    for (int ci = 0; ci < in.c; ++ci) {
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < in.h; ++y) {
            for (int x = 0; x < in.w; ++x) {
              acc += grad_out.at(co, 2 * y + ky, 2 * x + kx) * in.v[ci * ip + static_cast<std::size_t>(y) * in.w + x];
            }
          }
          grad_weight[((static_cast<std::size_t>(co) * in.c + ci) * 2 + ky) * 2 + kx] += acc;
        }
      }
    }
  }
  Tensor gin(in.c, in.h, in.w);
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < in.c; ++ci) {
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        double acc = 0.0;
        for (int co = 0; co < co_n; ++co) {
          for (int ky = 0; ky < 2; ++ky) {
            for (int kx = 0; kx < 2; ++kx) {
              acc += weight[((static_cast<std::size_t>(co) * in.c + ci) * 2 + ky) * 2 + kx] *
                     grad_out.at(co, 2 * y + ky, 2 * x + kx);
            }
          }
        }
        gin.at(ci, y, x) = acc;
      }
    }
  }
  return gin;
}

void relu_inplace(Tensor& t) {
  for (double& x : t.v) x = x > 0.0 ? x : 0.0;
}

void relu_backward_inplace(Tensor& grad, const Tensor& out) {
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    if (!(out.v[i] > 0.0)) grad.v[i] = 0.0;
  }
}

Tensor avg_pool2(const Tensor& in) {
  if (in.h % 2 != 0 || in.w % 2 != 0) throw InvalidArgument("avg_pool2: odd spatial size");
  Tensor out(in.c, in.h / 2, in.w / 2);
  for (int c = 0; c < in.c; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) + in.at(c, 2 * y + 1, 2 * x) +
                                  in.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
  return out;
}

Tensor avg_pool2_backward(const Tensor& g) {
  Tensor out(g.c, 2 * g.h, 2 * g.w);
  for (int c = 0; c < out.c; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) out.at(c, y, x) = 0.25 * g.at(c, y / 2, x / 2);
    }
  }
  return out;
}

Tensor upsample_nearest2(const Tensor& in) {
  Tensor out(in.c, 2 * in.h, 2 * in.w);
  for (int c = 0; c < out.c; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    }
  }
  return out;
}

Tensor upsample_nearest2_backward(const Tensor& g) {
  Tensor out(g.c, g.h / 2, g.w / 2);
  for (int c = 0; c < out.c; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        out.at(c, y, x) = g.at(c, 2 * y, 2 * x) + g.at(c, 2 * y, 2 * x + 1) + g.at(c, 2 * y + 1, 2 * x) +
                          g.at(c, 2 * y + 1, 2 * x + 1);
      }
    }
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) throw DimensionMismatch("concat_channels: spatial mismatch");
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return out;
}

void split_channels(const Tensor& grad, int first_channels, Tensor& ga, Tensor& gb) {
  ga = Tensor(first_channels, grad.h, grad.w);
  gb = Tensor(grad.c - first_channels, grad.h, grad.w);
  const auto mid = grad.v.begin() + static_cast<std::ptrdiff_t>(ga.v.size());
  std::copy(grad.v.begin(), mid, ga.v.begin());
  std::copy(mid, grad.v.end(), gb.v.begin());
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) throw DimensionMismatch("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw InvalidArgument("softplus_inverse: argument must be > 0");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

}  // namespace fnh::nn
