#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fnh/error.hpp"
#include "fnh/image.hpp"
#include "fnh/io.hpp"
#include "support.hpp"

using namespace fnh;
using fnh::testing::TempDir;

namespace {

// Written by an independent encoder.
const std::vector<std::uint8_t> kRgb255_0_128 = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00,
    0x0c, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8, 0xcf, 0xd0, 0x00, 0x00, 0x03, 0x81, 0x01, 0x80, 0xa2,
    0xad, 0x96, 0x81, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

const std::vector<std::uint8_t> kGray16Max2x2 = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00,
    0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x10, 0x00, 0x00, 0x00, 0x00, 0x07, 0x4d, 0x8e, 0xbb, 0x00,
    0x00, 0x00, 0x12, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xfc, 0xff, 0x9f, 0x81, 0x81, 0x89, 0x81,
    0x81, 0x81, 0x01, 0x00, 0x11, 0x0d, 0x02, 0x02, 0x5a, 0xbd, 0x34, 0x25, 0x00, 0x00, 0x00, 0x00, 0x49,
    0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

const std::vector<std::uint8_t> kRgba1x1 = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0x1f, 0x15, 0xc4, 0x89, 0x00, 0x00, 0x00,
    0x0d, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0x64, 0x62, 0x66, 0x01, 0x00, 0x00, 0x19, 0x00, 0x0b,
    0xe7, 0x5a, 0x46, 0xa4, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

void put(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) { write_file_bytes(p, bytes); }

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

TEST_CASE("containers enforce their shapes") {
  ImagePlane img(2, 3, 3, 0.25);
  CHECK(img.size() == 18);
  CHECK(img.pixels() == 6);
  img.at(1, 2, 1) = 0.75;
  CHECK(img[(1 * 3 + 2) * 3 + 1] == 0.75);
  CHECK(img.in_unit_range());
  img.at(0, 0, 0) = 1.5;
  CHECK_FALSE(img.in_unit_range());
  img.at(0, 0, 0) = std::nan("");
  CHECK_FALSE(img.in_unit_range());

  CHECK_THROWS_AS(ImagePlane(2, 2, 2), InvalidArgument);
  CHECK_THROWS_AS(ImagePlane(0, 2, 3), InvalidArgument);
  CHECK_THROWS_AS(ImagePlane(2, 2, 3, std::vector<double>(11)), DimensionMismatch);
  CHECK_THROWS_AS(ScalarField(2, 2, std::vector<double>(3)), DimensionMismatch);

  ScalarField f(2, 3, 1.0);
  CHECK(f.same_spatial(img));
  CHECK_THROWS_AS(require_same_spatial(ScalarField(3, 3), img, "x"), DimensionMismatch);
  CHECK_THROWS_AS(require_same_shape(ImagePlane(2, 3, 1), img, "x"), DimensionMismatch);
}

TEST_CASE("extract_channel and clamp_unit") {
  ImagePlane img(1, 2, 3, std::vector<double>{0.1, 0.2, 0.3, -0.5, 1.5, 0.6});
  const auto g = extract_channel(img, 1);
  CHECK(g[0] == 0.2);
  CHECK(g[1] == 1.5);
  CHECK_THROWS_AS(extract_channel(img, 3), InvalidArgument);
  const auto c = clamp_unit(img);
  CHECK(c[3] == 0.0);
  CHECK(c[4] == 1.0);
  CHECK(c[5] == 0.6);
}

TEST_CASE("load_image scales 8-bit RGB") {
  TempDir dir("io");
  put(dir / "rgb.png", kRgb255_0_128);
  const auto img = load_image(dir / "rgb.png");
  REQUIRE(img.channels() == 3);
  REQUIRE(img.height() == 1);
  CHECK(img[0] == 1.0);
  CHECK(img[1] == 0.0);
  CHECK(img[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("load_image reads 16-bit gray") {
  TempDir dir("io");
  put(dir / "g16.png", kGray16Max2x2);
  const auto img = load_image(dir / "g16.png");
  REQUIRE(img.channels() == 1);
  REQUIRE(img.size() == 4);
  for (double v : img.data()) CHECK(v == 1.0);
}

TEST_CASE("8-bit gray zero round trip") {
  TempDir dir("io");
  save_image(ImagePlane(1, 1, 1, 0.0), dir / "z.png");
  const auto img = load_image(dir / "z.png");
  CHECK(img.channels() == 1);
  CHECK(img[0] == 0.0);
}

TEST_CASE("load_image rejects bad inputs") {
  TempDir dir("io");
  CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
  put(dir / "rgba.png", kRgba1x1);
  CHECK_THROWS_AS(load_image(dir / "rgba.png"), FormatError);
  std::vector<std::uint8_t> cut(kRgb255_0_128.begin(), kRgb255_0_128.begin() + 40);
  put(dir / "cut.png", cut);
  CHECK_THROWS_AS(load_image(dir / "cut.png"), FormatError);
  put(dir / "junk.png", {1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK_THROWS_AS(load_image(dir / "junk.png"), FormatError);
}

TEST_CASE("save_image quantises half up") {
  TempDir dir("io");
  save_image(ImagePlane(1, 1, 1, 0.5), dir / "h.png");
  CHECK(load_image(dir / "h.png")[0] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));

  save_image(ImagePlane(1, 1, 1, 0.25), dir / "q.png", BitDepth::k16);
  CHECK(std::abs(load_image(dir / "q.png")[0] - 0.25) <= 1.0 / 65535.0);

  CHECK_THROWS_AS(save_image(ImagePlane(1, 1, 1, 1.2), dir / "bad.png"), InvalidArgument);
  CHECK_THROWS_AS(save_image(ImagePlane(1, 1, 1, -0.01), dir / "bad.png"), InvalidArgument);
  CHECK_THROWS_AS(save_image(ImagePlane(1, 1, 1, 0.5), dir / "no" / "such" / "dir.png"), IoError);
}

TEST_CASE("PNG round trip stays within one quantisation step") {
  TempDir dir("io");
  Rng rng = substream(11, 0);
  for (int c : {1, 3}) {
    const auto img = fnh::testing::random_image(rng, 7, 5, c);
    save_image(img, dir / "a.png", BitDepth::k8);
    save_image(img, dir / "b.png", BitDepth::k16);
    const auto a = load_image(dir / "a.png");
    const auto b = load_image(dir / "b.png");
    REQUIRE(a.same_shape(img));
    REQUIRE(b.same_shape(img));
    CHECK(fnh::testing::max_abs_diff(a.data(), img.data()) <= 0.5 / 255.0 + 1e-12);
    CHECK(fnh::testing::max_abs_diff(b.data(), img.data()) <= 0.5 / 65535.0 + 1e-12);
  }
}

TEST_CASE("FMAP field round trips") {
  TempDir dir("io");
  write_field(ScalarField(2, 3, 0.0), dir / "z.fmap");
  const auto z = read_field(dir / "z.fmap");
  CHECK(z.height() == 2);
  CHECK(z.width() == 3);
  for (double v : z.data()) CHECK(v == 0.0);

  write_field(ScalarField(1, 1, 0.704688), dir / "t.fmap");
  CHECK(read_field(dir / "t.fmap")[0] == static_cast<double>(0.704688f));

  // Any finite float32 survives unchanged.
  Rng rng = substream(5, 1);
  ScalarField f(4, 4);
  for (double& v : f.data()) v = static_cast<float>(std::ldexp(normal01(rng), static_cast<int>(uniform(rng, -60, 60))));
  f[0] = std::numeric_limits<float>::denorm_min();
  f[1] = std::numeric_limits<float>::max();
  f[2] = -0.0f;
  write_field(f, dir / "f.fmap");
  const auto g = read_field(dir / "f.fmap");
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(g[i]) == std::bit_cast<std::uint64_t>(f[i]));
  }
}

TEST_CASE("FMAP planes and layout") {
  TempDir dir("io");
  ImagePlane a(2, 2, 3);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.125 * static_cast<double>(i);
  write_plane(a, dir / "a.fmap");
  const auto raw = read_file_bytes(dir / "a.fmap");
  REQUIRE(raw.size() == 16 + 4 * 12);
  CHECK(raw[0] == 'F');
  CHECK(raw[3] == 'P');
  CHECK(raw[4] == 2);
  CHECK(raw[12] == 3);
  const auto b = read_plane(dir / "a.fmap");
  CHECK(b.same_shape(a));
  CHECK(fnh::testing::max_abs_diff(a.data(), b.data()) == 0.0);
  CHECK_THROWS_AS(read_field(dir / "a.fmap"), FormatError);
}

TEST_CASE("FMAP rejects malformed files") {
  TempDir dir("io");
  std::vector<std::uint8_t> b = {'F', 'M', 'A', 'P'};
  put_u32(b, 4);
  put_u32(b, 4);
  put_u32(b, 1);
  for (int i = 0; i < 15; ++i) put_u32(b, std::bit_cast<std::uint32_t>(1.0f));
  put(dir / "short.fmap", b);
  CHECK_THROWS_AS(read_field(dir / "short.fmap"), FormatError);
  try {
    read_field(dir / "short.fmap");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("15 of 16") != std::string::npos);
  }

  auto longer = b;
  for (int i = 0; i < 2; ++i) put_u32(longer, 0);
  put(dir / "long.fmap", longer);
  CHECK_THROWS_AS(read_field(dir / "long.fmap"), FormatError);

  auto magic = b;
  magic[0] = 'X';
  put(dir / "magic.fmap", magic);
  CHECK_THROWS_AS(read_field(dir / "magic.fmap"), FormatError);

  put(dir / "tiny.fmap", {'F', 'M'});
  CHECK_THROWS_AS(read_fmap(dir / "tiny.fmap"), FormatError);
  CHECK_THROWS_AS(read_fmap(dir / "none.fmap"), IoError);
}
