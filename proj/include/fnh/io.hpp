#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fnh/image.hpp"

namespace fnh {

enum class BitDepth { k8 = 8, k16 = 16 };

// Loads an 8- or 16-bit grayscale or RGB PNG; samples are scaled to [0, 1]
// by dividing by 255 or 65535.
ImagePlane load_image(const std::filesystem::path& path);

// Writes a PNG. Values must already lie in [0, 1]; quantisation rounds half
// up, i.e. q = floor(v * max + 0.5).
void save_image(const ImagePlane& img, const std::filesystem::path& path,
                BitDepth depth = BitDepth::k8);

/// Raw FMAP payload: "FMAP", u32 height, u32 width, u32 channels (all
/// little-endian) followed by row-major, channel-fastest float32 samples.
struct FmapData {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> values;
};

FmapData read_fmap(const std::filesystem::path& path);
void write_fmap(const std::filesystem::path& path, std::uint32_t height, std::uint32_t width,
                std::uint32_t channels, std::span<const double> values);

// Single-channel FMAP <-> ScalarField. Values are narrowed to float32.
ScalarField read_field(const std::filesystem::path& path);
void write_field(const ScalarField& field, const std::filesystem::path& path);

// Multi-channel FMAP <-> ImagePlane (used for atmospheric light maps).
ImagePlane read_plane(const std::filesystem::path& path);
void write_plane(const ImagePlane& img, const std::filesystem::path& path);

// Whole-file helpers shared by the PNG, FMAP and checkpoint codecs.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fnh
