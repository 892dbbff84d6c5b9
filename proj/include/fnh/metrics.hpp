#pragma once

#include <limits>

#include "fnh/image.hpp"

namespace fnh {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) with peak 1. Identical images give +infinity.
double psnr(const ImagePlane& a, const ImagePlane& b);

enum class SsimMode {
  kLuminance,   // RGB -> Rec.601 luma, then single-channel SSIM
  kPerChannel,  // mean of per-channel SSIM
};

struct SsimOptions {
  SsimMode mode = SsimMode::kLuminance;
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean SSIM over all valid Gaussian windows. Requires min(H, W) >= window.
double ssim(const ImagePlane& a, const ImagePlane& b, const SsimOptions& opts = {});

struct MetricResult {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

MetricResult evaluate(const ImagePlane& a, const ImagePlane& b, const SsimOptions& opts = {});

}  // namespace fnh
