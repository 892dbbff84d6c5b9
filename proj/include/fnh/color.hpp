#pragma once

#include <array>

#include "fnh/image.hpp"

namespace fnh {

using Rgb = std::array<double, 3>;
using Lab = std::array<double, 3>;
// Row k holds d(Lab_k) / d(rgb_0..2).
using LabJacobian = std::array<std::array<double, 3>, 3>;

// sRGB (D65) -> CIELAB for a single pixel with components in [0, 1].
Lab srgb_to_lab(const Rgb& rgb);

// Same conversion plus its Jacobian with respect to the sRGB inputs.
Lab srgb_to_lab(const Rgb& rgb, LabJacobian& jacobian);

// Whole-image conversion. Throws InvalidArgument unless channels == 3.
LabImage rgb_to_cielab(const ImagePlane& img);

}  // namespace fnh
