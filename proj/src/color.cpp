#include "fnh/color.hpp"

#include <cmath>

#include "fnh/error.hpp"

namespace fnh {

namespace {

// sRGB primaries -> XYZ, D65 white.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
// White-point normalised: (1,1,1) lands exactly on Xn, Yn, Zn.
constexpr double kWhite[3] = {
    kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2],
    kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2],
    kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2],
};

constexpr double kEpsilon = 216.0 / 24389.0;  // (6/29)^3
constexpr double kKappa = 24389.0 / 27.0;

double linearize(double v, double& deriv) {
  if (v <= 0.04045) {
    deriv = 1.0 / 12.92;
    return v / 12.92;
  }
  const double base = (v + 0.055) / 1.055;
  deriv = 2.4 / 1.055 * std::pow(base, 1.4);
  return std::pow(base, 2.4);
}

double lab_f(double t, double& deriv) {
  if (t > kEpsilon) {
    const double c = std::cbrt(t);
    deriv = 1.0 / (3.0 * c * c);
    return c;
  }
  deriv = kKappa / 116.0;
  return (kKappa * t + 16.0) / 116.0;
}

}  // namespace

Lab srgb_to_lab(const Rgb& rgb, LabJacobian& jac) {
  double lin[3];
  double dlin[3];
  for (int i = 0; i < 3; ++i) lin[i] = linearize(rgb[i], dlin[i]);

  double f[3];
  double df[3];
  for (int r = 0; r < 3; ++r) {
    const double xyz = (kRgbToXyz[r][0] * lin[0] + kRgbToXyz[r][1] * lin[1] + kRgbToXyz[r][2] * lin[2]) / kWhite[r];
    f[r] = lab_f(xyz, df[r]);
  }

  // d f_r / d rgb_i
  double dfd[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < 3; ++i) dfd[r][i] = df[r] * kRgbToXyz[r][i] / kWhite[r] * dlin[i];
  }
  for (int i = 0; i < 3; ++i) {
    jac[0][i] = 116.0 * dfd[1][i];
    jac[1][i] = 500.0 * (dfd[0][i] - dfd[1][i]);
    jac[2][i] = 200.0 * (dfd[1][i] - dfd[2][i]);
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

Lab srgb_to_lab(const Rgb& rgb) {
  LabJacobian unused;
  return srgb_to_lab(rgb, unused);
}

LabImage rgb_to_cielab(const ImagePlane& img) {
  if (img.channels() != 3) throw InvalidArgument("rgb_to_cielab requires a 3-channel image");
  LabImage out{img.height(), img.width(), std::vector<double>(img.size())};
  const std::size_t n = img.pixels();
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < n; ++p) {
    const Lab lab = srgb_to_lab({img[3 * p], img[3 * p + 1], img[3 * p + 2]});
    out.data[3 * p] = lab[0];
    out.data[3 * p + 1] = lab[1];
    out.data[3 * p + 2] = lab[2];
  }
  return out;
}

}  // namespace fnh
