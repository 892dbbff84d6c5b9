#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <span>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "fnh/image.hpp"
#include "fnh/rng.hpp"

namespace fnh::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fnh_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ImagePlane random_image(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  ImagePlane img(h, w, c);
  for (double& v : img.data()) v = uniform(rng, lo, hi);
  return img;
}

inline ScalarField random_field(Rng& rng, int h, int w, double lo, double hi) {
  ScalarField f(h, w);
  for (double& v : f.data()) v = uniform(rng, lo, hi);
  return f;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fnh::testing
