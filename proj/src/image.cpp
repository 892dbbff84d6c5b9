#include "fnh/image.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fnh/error.hpp"

namespace fnh {

namespace {

void check_dims(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw InvalidArgument("image dimensions must be positive");
  }
}

std::string shape_str(int h, int w, int c) {
  std::ostringstream os;
  os << h << "x" << w << "x" << c;
  return os.str();
}

}  // namespace

ImagePlane::ImagePlane(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width);
  if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImagePlane::ImagePlane(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width);
  if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionMismatch("image data length does not match " + shape_str(height, width, channels));
  }
}

bool ImagePlane::in_unit_range() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

ScalarField::ScalarField(int height, int width, double fill) : height_(height), width_(width) {
  check_dims(height, width);
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

ScalarField::ScalarField(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  check_dims(height, width);
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionMismatch("field data length does not match " + shape_str(height, width, 1));
  }
}

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(what + ": " + shape_str(a.height(), a.width(), a.channels()) + " vs " +
                            shape_str(b.height(), b.width(), b.channels()));
  }
}

void require_same_shape(const ScalarField& a, const ScalarField& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(what + ": " + shape_str(a.height(), a.width(), 1) + " vs " +
                            shape_str(b.height(), b.width(), 1));
  }
}

void require_same_spatial(const ScalarField& f, const ImagePlane& img, const std::string& what) {
  if (!f.same_spatial(img)) {
    throw DimensionMismatch(what + ": field " + shape_str(f.height(), f.width(), 1) + " vs image " +
                            shape_str(img.height(), img.width(), img.channels()));
  }
}

ScalarField extract_channel(const ImagePlane& img, int channel) {
  if (channel < 0 || channel >= img.channels()) throw InvalidArgument("channel out of range");
  ScalarField out(img.height(), img.width());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    out[p] = img[p * img.channels() + channel];
  }
  return out;
}

ImagePlane clamp_unit(const ImagePlane& img) {
  ImagePlane out = img;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace fnh
