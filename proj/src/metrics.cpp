#include "fnh/metrics.hpp"

#include <cmath>
#include <vector>

#include "fnh/error.hpp"
#include "fnh/kernels.hpp"

namespace fnh {

double psnr(const ImagePlane& a, const ImagePlane& b) {
  require_same_shape(a, b, "psnr");
  std::vector<double> sq(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq[i] = d * d;
  }
  const double mse = kernels::pairwise_sum(sq) / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

struct Plane {
  int h = 0;
  int w = 0;
  std::vector<double> v;
};

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  const double centre = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - centre;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable 'valid' filtering: output is (h - k + 1) x (w - k + 1).
Plane filter_valid(const Plane& in, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = in.w - k + 1;
  const int oh = in.h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(in.h) * ow);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * in.v[static_cast<std::size_t>(y) * in.w + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  Plane out{oh, ow, std::vector<double>(static_cast<std::size_t>(oh) * ow)};
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out.v[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out{a.h, a.w, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

double ssim_plane(const Plane& x, const Plane& y, const SsimOptions& o) {
  const auto taps = gaussian_taps(o.window, o.sigma);
  const double c1 = o.k1 * o.k1;
  const double c2 = o.k2 * o.k2;
  const Plane mx = filter_valid(x, taps);
  const Plane my = filter_valid(y, taps);
  const Plane exx = filter_valid(product(x, x), taps);
  const Plane eyy = filter_valid(product(y, y), taps);
  const Plane exy = filter_valid(product(x, y), taps);
  std::vector<double> map(mx.v.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double sxx = exx.v[i] - mx.v[i] * mx.v[i];
    const double syy = eyy.v[i] - my.v[i] * my.v[i];
    const double sxy = exy.v[i] - mx.v[i] * my.v[i];
    const double num = (2.0 * mx.v[i] * my.v[i] + c1) * (2.0 * sxy + c2);
    const double den = (mx.v[i] * mx.v[i] + my.v[i] * my.v[i] + c1) * (sxx + syy + c2);
    map[i] = num / den;
  }
  return kernels::pairwise_sum(map) / static_cast<double>(map.size());
}

Plane channel_plane(const ImagePlane& img, int c) {
  Plane p{img.height(), img.width(), std::vector<double>(img.pixels())};
  for (std::size_t i = 0; i < img.pixels(); ++i) p.v[i] = img[i * img.channels() + c];
  return p;
}

Plane luma_plane(const ImagePlane& img) {
  if (img.channels() == 1) return channel_plane(img, 0);
  Plane p{img.height(), img.width(), std::vector<double>(img.pixels())};
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    p.v[i] = 0.299 * img[3 * i] + 0.587 * img[3 * i + 1] + 0.114 * img[3 * i + 2];
  }
  return p;
}

}  // namespace

double ssim(const ImagePlane& a, const ImagePlane& b, const SsimOptions& opts) {
  require_same_shape(a, b, "ssim");
  if (opts.window < 1 || opts.window % 2 == 0) throw InvalidArgument("ssim: window must be odd and positive");
  if (std::min(a.height(), a.width()) < opts.window) {
    throw InvalidArgument("ssim: image smaller than the " + std::to_string(opts.window) + "x" +
                          std::to_string(opts.window) + " window");
  }
  if (opts.mode == SsimMode::kLuminance || a.channels() == 1) {
    return ssim_plane(luma_plane(a), luma_plane(b), opts);
  }
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) total += ssim_plane(channel_plane(a, c), channel_plane(b, c), opts);
  return total / a.channels();
}

MetricResult evaluate(const ImagePlane& a, const ImagePlane& b, const SsimOptions& opts) {
  return {psnr(a, b), ssim(a, b, opts)};
}

}  // namespace fnh
