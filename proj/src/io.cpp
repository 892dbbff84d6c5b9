#include "fnh/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "fnh/error.hpp"

namespace fnh {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct PngMessage {
  std::string text;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngMessage*>(png_get_error_ptr(png));
  if (sink != nullptr) sink->text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct MemReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + count > r->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, r->data + r->pos, count);
  r->pos += count;
}

void png_mem_write(png_structp png, png_bytep in, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + count);
}

void png_mem_flush(png_structp) {}

struct DecodedPng {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> raw;  // rows as stored, big-endian for 16-bit
  std::vector<png_bytep> rows;
};

// Returns an empty string on success, else the failure reason. No objects
// with destructors live in this frame across the setjmp.
std::string decode_png(const std::vector<std::uint8_t>& bytes, DecodedPng* out, PngMessage* msg) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) return "not a PNG file";

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, msg, png_error_fn, png_warning_fn);
  if (png == nullptr) return "png_create_read_struct failed";
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "png_create_info_struct failed";
  }
  MemReader reader{bytes.data(), bytes.size(), 0};

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return msg->text.empty() ? "corrupt PNG stream" : msg->text;
  }

  png_set_read_fn(png, &reader, png_mem_read);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth != 8 && bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    msg->text = "unsupported bit depth " + std::to_string(bit_depth);
    return msg->text;
  }
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    msg->text = "unsupported color type " + std::to_string(color_type);
    return msg->text;
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_set_interlace_handling(png);
  }
  png_read_update_info(png, info);

  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  out->bit_depth = bit_depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out->raw.resize(rowbytes * out->height);
  out->rows.resize(out->height);
  for (std::uint32_t y = 0; y < out->height; ++y) out->rows[y] = out->raw.data() + y * rowbytes;
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return {};
}

std::string encode_png(const std::vector<std::uint8_t>& raw, std::uint32_t width, std::uint32_t height,
                       int channels, int bit_depth, std::vector<std::uint8_t>* out, PngMessage* msg) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, msg, png_error_fn, png_warning_fn);
  if (png == nullptr) return "png_create_write_struct failed";
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return "png_create_info_struct failed";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return msg->text.empty() ? "PNG encode failed" : msg->text;
  }
  png_set_write_fn(png, out, png_mem_write, png_mem_flush);
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (std::uint32_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(raw.data() + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return {};
}

}  // namespace

ImagePlane load_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing file: " + path.string());
  const auto bytes = read_file_bytes(path);
  DecodedPng png;
  PngMessage msg;
  if (auto err = decode_png(bytes, &png, &msg); !err.empty()) {
    throw FormatError(path.string() + ": " + err);
  }
  ImagePlane img(static_cast<int>(png.height), static_cast<int>(png.width), png.channels);
  auto data = img.data();
  if (png.bit_depth == 8) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = png.raw[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const unsigned v = (static_cast<unsigned>(png.raw[2 * i]) << 8) | png.raw[2 * i + 1];
      data[i] = v / 65535.0;
    }
  }
  return img;
}

void save_image(const ImagePlane& img, const fs::path& path, BitDepth depth) {
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  if (!img.in_unit_range()) {
    throw InvalidArgument("save_image: values outside [0,1]; clamp before saving " + path.string());
  }
  const auto data = img.data();
  const int bits = static_cast<int>(depth);
  std::vector<std::uint8_t> raw(data.size() * (bits / 8));
  if (depth == BitDepth::k8) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      raw[i] = static_cast<std::uint8_t>(std::floor(data[i] * 255.0 + 0.5));
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto q = static_cast<std::uint16_t>(std::floor(data[i] * 65535.0 + 0.5));
      raw[2 * i] = static_cast<std::uint8_t>(q >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
  }
  std::vector<std::uint8_t> encoded;
  PngMessage msg;
  if (auto err = encode_png(raw, static_cast<std::uint32_t>(img.width()),
                            static_cast<std::uint32_t>(img.height()), img.channels(), bits, &encoded, &msg);
      !err.empty()) {
    throw IoError(path.string() + ": " + err);
  }
  write_file_bytes(path, encoded);
}

// ---------------------------------------------------------------------------
// FMAP

namespace {

constexpr char kFmapMagic[4] = {'F', 'M', 'A', 'P'};
constexpr std::size_t kFmapHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

FmapData read_fmap(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < kFmapHeader || std::memcmp(bytes.data(), kFmapMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad FMAP magic");
  }
  FmapData out;
  out.height = get_u32(bytes.data() + 4);
  out.width = get_u32(bytes.data() + 8);
  out.channels = get_u32(bytes.data() + 12);
  if (out.height == 0 || out.width == 0 || out.channels == 0) {
    throw FormatError(path.string() + ": zero dimension in FMAP header");
  }
  const std::uint64_t count = std::uint64_t{out.height} * out.width * out.channels;
  const std::uint64_t payload = bytes.size() - kFmapHeader;
  if (payload < count * 4) {
    throw FormatError(path.string() + ": truncated FMAP payload (" + std::to_string(payload / 4) +
                      " of " + std::to_string(count) + " floats)");
  }
  if (payload != count * 4) {
    throw FormatError(path.string() + ": FMAP payload length does not match header");
  }
  out.values.resize(count);
  const std::uint8_t* p = bytes.data() + kFmapHeader;
  for (std::uint64_t i = 0; i < count; ++i, p += 4) out.values[i] = std::bit_cast<float>(get_u32(p));
  return out;
}

void write_fmap(const fs::path& path, std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                std::span<const double> values) {
  if (values.size() != std::uint64_t{height} * width * channels) {
    throw DimensionMismatch("write_fmap: value count does not match dimensions");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFmapHeader + values.size() * 4);
  out.insert(out.end(), kFmapMagic, kFmapMagic + 4);
  put_u32(out, height);
  put_u32(out, width);
  put_u32(out, channels);
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file_bytes(path, out);
}

ScalarField read_field(const fs::path& path) {
  auto raw = read_fmap(path);
  if (raw.channels != 1) throw FormatError(path.string() + ": expected a single-channel FMAP");
  return ScalarField(static_cast<int>(raw.height), static_cast<int>(raw.width),
                     std::vector<double>(raw.values.begin(), raw.values.end()));
}

void write_field(const ScalarField& field, const fs::path& path) {
  write_fmap(path, static_cast<std::uint32_t>(field.height()), static_cast<std::uint32_t>(field.width()), 1,
             field.data());
}

ImagePlane read_plane(const fs::path& path) {
  auto raw = read_fmap(path);
  if (raw.channels != 1 && raw.channels != 3) throw FormatError(path.string() + ": expected 1 or 3 channels");
  return ImagePlane(static_cast<int>(raw.height), static_cast<int>(raw.width), static_cast<int>(raw.channels),
                    std::vector<double>(raw.values.begin(), raw.values.end()));
}

void write_plane(const ImagePlane& img, const fs::path& path) {
  write_fmap(path, static_cast<std::uint32_t>(img.height()), static_cast<std::uint32_t>(img.width()),
             static_cast<std::uint32_t>(img.channels()), img.data());
}

}  // namespace fnh
