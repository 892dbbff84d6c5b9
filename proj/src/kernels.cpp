#include "fnh/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fnh::kernels {

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 64;
  if (values.size() <= kLeaf) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

inline double synth_px(double j, double a, double t) { return j * t + a * (1.0 - t); }
inline double dehaze_px(double i, double a, double amp) { return (i - a) * amp + a; }

}  // namespace

// ---------------------------------------------------------------------------

namespace serial {

void synthesize(std::span<const double> clean, std::span<const double> alf, std::span<const double> beta,
                std::span<const double> depth, int channels, std::span<double> hazy) {
  for (std::size_t p = 0; p < beta.size(); ++p) {
    const double t = std::exp(-beta[p] * depth[p]);
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      hazy[i] = synth_px(clean[i], alf[i], t);
    }
  }
}

void dehaze(std::span<const double> hazy, std::span<const double> alf, std::span<const double> beta,
            std::span<const double> depth, int channels, std::span<double> clean) {
  for (std::size_t p = 0; p < beta.size(); ++p) {
    const double amp = std::exp(beta[p] * depth[p]);
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      clean[i] = dehaze_px(hazy[i], alf[i], amp);
    }
  }
}

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  const int pad = s.kernel / 2;
  for (int co = 0; co < s.out_channels; ++co) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        double acc = bias[co];
        for (int ci = 0; ci < s.in_channels; ++ci) {
          for (int ky = 0; ky < s.kernel; ++ky) {
            const int iy = y + ky - pad;
            if (iy < 0 || iy >= s.height) continue;
            for (int kx = 0; kx < s.kernel; ++kx) {
              const int ix = x + kx - pad;
              if (ix < 0 || ix >= s.width) continue;
              const double w = weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel + ky) * s.kernel + kx];
              acc += w * in[(static_cast<std::size_t>(ci) * s.height + iy) * s.width + ix];
            }
          }
        }
        out[(static_cast<std::size_t>(co) * s.height + y) * s.width + x] = acc;
      }
    }
  }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weight,
                           std::span<double> grad_in) {
  const int pad = s.kernel / 2;
  for (int ci = 0; ci < s.in_channels; ++ci) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        double acc = 0.0;
        for (int co = 0; co < s.out_channels; ++co) {
          for (int ky = 0; ky < s.kernel; ++ky) {
            const int oy = y - ky + pad;
            if (oy < 0 || oy >= s.height) continue;
            for (int kx = 0; kx < s.kernel; ++kx) {
              const int ox = x - kx + pad;
              if (ox < 0 || ox >= s.width) continue;
              const double w = weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel + ky) * s.kernel + kx];
              acc += w * grad_out[(static_cast<std::size_t>(co) * s.height + oy) * s.width + ox];
            }
          }
        }
        grad_in[(static_cast<std::size_t>(ci) * s.height + y) * s.width + x] += acc;
      }
    }
  }
}

void conv2d_backward_weight(const ConvShape& s, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  const int pad = s.kernel / 2;
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  for (int co = 0; co < s.out_channels; ++co) {
    const double* go = grad_out.data() + co * plane;
    double bacc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bacc += go[i];
    grad_bias[co] += bacc;
    for (int ci = 0; ci < s.in_channels; ++ci) {
      for (int ky = 0; ky < s.kernel; ++ky) {
        for (int kx = 0; kx < s.kernel; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < s.height; ++y) {
            const int iy = y + ky - pad;
            if (iy < 0 || iy >= s.height) continue;
            for (int x = 0; x < s.width; ++x) {
              const int ix = x + kx - pad;
              if (ix < 0 || ix >= s.width) continue;
              acc += go[static_cast<std::size_t>(y) * s.width + x] *
                     in[(static_cast<std::size_t>(ci) * s.height + iy) * s.width + ix];
            }
          }
          grad_weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel + ky) * s.kernel + kx] += acc;
        }
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------

namespace omp {

void synthesize(std::span<const double> clean, std::span<const double> alf, std::span<const double> beta,
                std::span<const double> depth, int channels, std::span<double> hazy) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(beta.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const double t = std::exp(-beta[p] * depth[p]);
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(p) * channels + c;
      hazy[i] = synth_px(clean[i], alf[i], t);
    }
  }
}

void dehaze(std::span<const double> hazy, std::span<const double> alf, std::span<const double> beta,
            std::span<const double> depth, int channels, std::span<double> clean) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(beta.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const double amp = std::exp(beta[p] * depth[p]);
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(p) * channels + c;
      clean[i] = dehaze_px(hazy[i], alf[i], amp);
    }
  }
}

// Row-oriented convolution: for each tap the valid output rectangle is
// updated with a contiguous multiply-add so the inner loop vectorises.
void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  const int pad = s.kernel / 2;
  const int H = s.height;
  const int W = s.width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
#pragma omp parallel for schedule(static)
  for (int co = 0; co < s.out_channels; ++co) {
    double* o = out.data() + co * plane;
    std::fill(o, o + plane, bias[co]);
    for (int ci = 0; ci < s.in_channels; ++ci) {
      const double* src = in.data() + ci * plane;
      const double* wk = weight.data() + (static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel * s.kernel;
      for (int ky = 0; ky < s.kernel; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(H, H - dy);
        for (int kx = 0; kx < s.kernel; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(W, W - dx);
          const double w = wk[ky * s.kernel + kx];
          for (int y = y0; y < y1; ++y) {
            double* orow = o + static_cast<std::size_t>(y) * W;
            const double* irow = src + static_cast<std::size_t>(y + dy) * W + dx;
            for (int x = x0; x < x1; ++x) orow[x] += w * irow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_out, std::span<const double> weight,
                           std::span<double> grad_in) {
  const int pad = s.kernel / 2;
  const int H = s.height;
  const int W = s.width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
#pragma omp parallel
  {
    std::vector<double> acc(plane);
#pragma omp for schedule(static)
    for (int ci = 0; ci < s.in_channels; ++ci) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int co = 0; co < s.out_channels; ++co) {
        const double* go = grad_out.data() + co * plane;
        const double* wk = weight.data() + (static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel * s.kernel;
        for (int ky = 0; ky < s.kernel; ++ky) {
          const int dy = pad - ky;  // output row = input row + dy
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(H, H - dy);
          for (int kx = 0; kx < s.kernel; ++kx) {
            const int dx = pad - kx;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(W, W - dx);
            const double w = wk[ky * s.kernel + kx];
            for (int y = y0; y < y1; ++y) {
              double* arow = acc.data() + static_cast<std::size_t>(y) * W;
              const double* grow = go + static_cast<std::size_t>(y + dy) * W + dx;
              for (int x = x0; x < x1; ++x) arow[x] += w * grow[x];
            }
          }
        }
      }
      double* gi = grad_in.data() + ci * plane;
      for (std::size_t i = 0; i < plane; ++i) gi[i] += acc[i];
    }
  }
}

void conv2d_backward_weight(const ConvShape& s, std::span<const double> grad_out, std::span<const double> in,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  const int pad = s.kernel / 2;
  const int H = s.height;
  const int W = s.width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
#pragma omp parallel for schedule(static)
  for (int co = 0; co < s.out_channels; ++co) {
    const double* go = grad_out.data() + co * plane;
    double bacc = 0.0;
#pragma omp simd reduction(+ : bacc)
    for (std::size_t i = 0; i < plane; ++i) bacc += go[i];
    grad_bias[co] += bacc;
    for (int ci = 0; ci < s.in_channels; ++ci) {
      const double* src = in.data() + ci * plane;
      double* gw = grad_weight.data() + (static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel * s.kernel;
      for (int ky = 0; ky < s.kernel; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(H, H - dy);
        for (int kx = 0; kx < s.kernel; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(W, W - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = go + static_cast<std::size_t>(y) * W;
            const double* irow = src + static_cast<std::size_t>(y + dy) * W + dx;
#pragma omp simd reduction(+ : acc)
            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
          }
          gw[ky * s.kernel + kx] += acc;
        }
      }
    }
  }
}

}  // namespace omp

}  // namespace fnh::kernels
