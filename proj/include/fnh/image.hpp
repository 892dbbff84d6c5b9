#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fnh {

/// H x W x C intensity image, row-major with channels fastest. Holds hazy
/// images, clean images and per-channel atmospheric light maps.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int height, int width, int channels, double fill = 0.0);
  ImagePlane(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const ImagePlane& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  // True when every value is finite and within [0, 1].
  bool in_unit_range() const;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// H x W single-channel real field: scattering coefficient, depth or
/// transmission maps.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int height, int width, double fill = 0.0);
  ScalarField(int height, int width, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const ScalarField& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_spatial(const ImagePlane& img) const {
    return height_ == img.height() && width_ == img.width();
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// CIELAB image, channel order (L, a, b).
struct LabImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // H x W x 3

  double L(std::size_t px) const { return data[3 * px]; }
  double a(std::size_t px) const { return data[3 * px + 1]; }
  double b(std::size_t px) const { return data[3 * px + 2]; }
};

// Throws DimensionMismatch with `what` as context when shapes differ.
void require_same_shape(const ImagePlane& a, const ImagePlane& b, const std::string& what);
void require_same_shape(const ScalarField& a, const ScalarField& b, const std::string& what);
void require_same_spatial(const ScalarField& f, const ImagePlane& img, const std::string& what);

// Copies of a single channel / clamped copies.
ScalarField extract_channel(const ImagePlane& img, int channel);
ImagePlane clamp_unit(const ImagePlane& img);

}  // namespace fnh
