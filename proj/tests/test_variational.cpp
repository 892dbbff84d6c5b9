#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fnh/error.hpp"
#include "fnh/variational.hpp"
#include "support.hpp"

using namespace fnh;

namespace {

// Blocks of saturated primaries, secondaries and black: every pixel already
// has a zero dark channel, so no haze is the optimum.
ImagePlane test_card(int h, int w) {
  const double colors[][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {0, 1, 1}, {1, 0, 1}, {0, 0, 0}, {1, 0, 0}};
  ImagePlane img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& c = colors[(y / 8) * 4 % 8 + (x / 8) % 4];
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
    }
  }
  return img;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

ImagePlane hazy_scene(std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  const int h = 24, w = 32;
  const auto clean = fnh::testing::random_image(rng, h, w, 3, 0.0, 0.9);
  ScalarField depth(h, w), asc(h, w, 0.3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) depth.at(y, x) = 3.0 - 2.0 * y / (h - 1);
  }
  return synthesize(clean, {ImagePlane(h, w, 3, 0.85), asc, depth});
}

}  // namespace

TEST_CASE("config validation and JSON") {
  VariationalConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.smooth_weight = 0.3;
  const nlohmann::json j = c;
  CHECK(j.get<VariationalConfig>().smooth_weight == 0.3);
}

TEST_CASE("haze-free test card recovers negligible scattering") {
  const auto card = test_card(32, 32);
  const auto r = variational_estimate(card);
  std::vector<double> beta(r.params.asc.data().begin(), r.params.asc.data().end());
  CHECK(median(beta) < 0.05);
  CHECK(r.residual < 0.02);
}

TEST_CASE("reconstruction is self-consistent") {
  const auto hazy = hazy_scene(12);
  const auto r = variational_estimate(hazy);
  CHECK(r.residual < 0.02);
  CHECK(r.dehazed.in_unit_range());
  CHECK(r.dehazed.same_shape(hazy));
  const auto again = synthesize(r.dehazed, r.params);
  CHECK(fnh::testing::max_abs_diff(again.data(), hazy.data()) == doctest::Approx(r.residual).epsilon(1e-12));
  for (double b : r.params.asc.data()) CHECK(b >= 0.0);
  for (double d : r.params.depth.data()) CHECK(d > 0.0);
  CHECK(r.params.alf.in_unit_range());
  CHECK(std::isfinite(r.objective));
  CHECK(r.iterations >= 1);
}

TEST_CASE("strong smoothing flattens the scattering map") {
  VariationalConfig cfg;
  cfg.smooth_weight = 1e6;
  const auto r = variational_estimate(hazy_scene(13), cfg);
  const auto [lo, hi] = std::minmax_element(r.params.asc.data().begin(), r.params.asc.data().end());
  CHECK(*hi - *lo < 1e-3);
  CHECK(r.residual < 0.02);
}

TEST_CASE("variational input validation") {
  ImagePlane bad(16, 16, 3, 0.5);
  bad.at(3, 3, 1) = 1.5;
  CHECK_THROWS_AS(variational_estimate(bad), InvalidArgument);
}
