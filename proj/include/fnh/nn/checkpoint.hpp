#pragma once

#include <filesystem>

#include "fnh/nn/model.hpp"

namespace fnh::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "FNHD", u32 version, u32 header length, JSON header (config, slot names and
// shapes, parameter count), then float32 little-endian parameters in slot
// order. Parameters are narrowed to float32 on save.
void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fnh::nn
